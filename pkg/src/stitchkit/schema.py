"""JSON schemas for the scene and trial configuration files."""

import jsonschema

from .errors import InvalidConfig

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_mat3 = {"type": "array", "items": _vec3, "minItems": 3, "maxItems": 3}
_prob = {"type": "number", "minimum": 0, "exclusiveMaximum": 1}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

NOISE_SCHEMA = {
    "type": "object",
    "description": "Needle cloud noise.",
    "properties": {
        "sigma": {**_nonneg, "description": "Gaussian jitter per axis, mm."},
        "specular_dropout": {**_prob, "description": "Probability a sample is dropped."},
        "boundary_factor": {"type": "number", "minimum": 1,
                            "description": "Jitter multiplier near the needle ends."},
        "boundary_band": {"type": "number", "minimum": 0, "maximum": 0.5,
                          "description": "Fraction of the arc at each end that gets the boosted jitter."},
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}

CAMERA_SCHEMA = {
    "type": "object",
    "description": "Pinhole camera; rotation/translation map camera to world coordinates.",
    "properties": {
        "fx": _pos, "fy": _pos, "cx": {"type": "number"}, "cy": {"type": "number"},
        "width": {"type": "integer", "minimum": 1}, "height": {"type": "integer", "minimum": 1},
        "rotation": _mat3, "translation": _vec3,
    },
    "required": ["fx", "fy", "cx", "cy"],
    "additionalProperties": False,
}

SCENE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stitchkit scene",
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "description": "Master seed for every random draw."},
        "needle": {
            "type": "object",
            "properties": {
                "radius": {**_pos, "description": "Needle radius, mm. Default 40/pi."},
                "position": {**_vec3, "description": "Needle centre in world coordinates, mm."},
                "rotation": {**_mat3, "description": "Needle frame; local z is the arc normal."},
                "thread_side": {"enum": ["left", "right"]},
            },
            "additionalProperties": False,
        },
        "noise": NOISE_SCHEMA,
        "clouds": {"type": "integer", "minimum": 1, "description": "Number of needle clouds to write."},
        "points": {"type": "integer", "minimum": 10, "description": "Samples per needle cloud before dropout."},
        "camera": CAMERA_SCHEMA,
        "render": {
            "type": "object",
            "properties": {
                "pixel_thickness": _pos,
                "depth_sigma": _nonneg,
                "background_depth": {"type": ["number", "null"]},
                "quantization": _nonneg,
            },
            "additionalProperties": False,
        },
        "wound": {
            "type": "object",
            "properties": {
                "height": _pos, "width": _pos, "length": _pos,
                "rotation": _mat3, "translation": _vec3,
                "points_per_cloud": {"type": "integer", "minimum": 10},
                "sigma": _nonneg,
                "noise_axis": {"enum": ["normal", "isotropic"]},
                "phantom_margin": _nonneg,
                "phantom_tilt_deg": {"type": "number"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

TRIAL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stitchkit trial config",
    "type": "object",
    "properties": {
        "n_sutures": {"type": "integer", "minimum": 1},
        "enable_ekf": {"type": "boolean"},
        "enable_thread_mgmt": {"type": "boolean"},
        "enable_alignment": {"type": "boolean"},
        "noise": NOISE_SCHEMA,
        "cloud_points": {"type": "integer", "minimum": 10},
        "ransac_iterations": {"type": "integer", "minimum": 1},
        "depth_sigma": _nonneg,
        "wound_sigma": _nonneg,
        "grasp_tolerance": _pos,
        "insertion_height_tolerance": _pos,
        "alignment_tolerance_deg": _pos,
        "gripper_sigma": _nonneg,
        "tangle_prob_raw": _prob,
        "tangle_prob_swept": _prob,
        "alignment_snap_prob": _prob,
        "closure_miss_prob": _prob,
        "estimate_success_mm": _pos,
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}


def validate(instance, schema):
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidConfig(f"{where}: {exc.message}") from None
    return instance
