import pytest

from rsu_reliability.scenario import scenario_from_dict


def small_intersection(**overrides):
    """Compact crossing used by unit tests: eastbound ego, northbound traffic."""
    cfg = {
        "seed": 42,
        "duration": 20.0,
        "tick": 0.1,
        "map": {
            "lanes": [
                {
                    "lane_id": "north",
                    "centerline": [[0.0, -80.0], [0.0, 80.0]],
                    "width": 2.75,
                },
                {
                    "lane_id": "east",
                    "centerline": [[-130.0, 0.0], [140.0, 0.0]],
                    "width": 3.0,
                },
            ],
            "rsu_fov": [[-50.0, -60.0], [70.0, -60.0], [70.0, 60.0], [-50.0, 60.0]],
            "blind_spot": None,
        },
        "ego": {"lane_id": "east", "entry_time": 0.0, "speed": 8.0, "sigma": 0.1},
        "actors": [
            {"lane_id": "north", "entry_time": 0.0, "speed": 8.0,
             "class_tag": "vehicle"},
        ],
        "fault": {"kind": "none", "onset": 0.0, "magnitude": 0.0},
        "noise": {"rsu_pos_std": 0.3, "ego_perc_std": 0.15},
    }
    cfg.update(overrides)
    return cfg


@pytest.fixture
def base_config_dict():
    return small_intersection()


@pytest.fixture
def base_config(base_config_dict):
    return scenario_from_dict(base_config_dict)
