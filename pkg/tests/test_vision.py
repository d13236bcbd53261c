import numpy as np
import pytest

from reachbench import kinematics, vision
from reachbench.agents import AgentConfig, make_agent
from reachbench.curriculum import evaluate_policy
from reachbench.environment import EpisodeConfig, ReachingEnv, builtin_action_space


@pytest.fixture(scope="module")
def cam():
    return vision.CameraConfig()


@pytest.fixture(scope="module")
def mask(chain, table, cam):
    return vision.background_mask_for(chain, table, cam, 20, np.random.default_rng(0))


def test_calibration_round_trip(table, cam):
    cal = cam.calibration(table.target_z)
    rng = np.random.default_rng(0)
    half_px = 0.5 * max(abs(cal.scale_x), abs(cal.scale_y))
    for _ in range(1000):
        p = kinematics.sample_target(table, rng)
        u, v = cal.world_to_pixel(p)
        back = cal.pixel_to_world(round(u), round(v))
        assert np.all(np.abs(back[:2] - p[:2]) <= half_px + 1e-12)
        np.testing.assert_allclose(cal.pixel_to_world(u, v), p, atol=1e-12)


def test_row_zero_is_far_edge(table, cam):
    cal = cam.calibration(table.target_z)
    assert cal.pixel_to_world(0, 0)[1] > cal.pixel_to_world(0, 255)[1]
    assert cal.pixel_to_world(0, 0)[0] < cal.pixel_to_world(255, 0)[0]


def test_render_is_deterministic_and_places_disk(chain, table, cam):
    p = np.array([0.3, 0.5, table.target_z])
    a = vision.render(chain, table, np.zeros(6), p, cam)
    b = vision.render(chain, table, np.zeros(6), p, cam)
    assert a.shape == (256, 256, 3) and a.dtype == np.uint8
    assert a.tobytes() == b.tobytes()
    blue = np.all(a == vision.CYLINDER, axis=2)
    rows, cols = np.nonzero(blue)
    u, v = cam.calibration(table.target_z).world_to_pixel(p)
    assert abs(cols.mean() - round(u)) < 1e-9 and abs(rows.mean() - round(v)) < 1e-9


def test_cylinder_only_changes_its_bounding_box(chain, table, cam):
    p = np.array([-0.4, 0.6, table.target_z])
    with_c = vision.render(chain, table, np.zeros(6), p, cam)
    without = vision.render(chain, table, np.zeros(6), None, cam)
    rows, cols = np.nonzero(np.any(with_c != without, axis=2))
    u, v = cam.calibration(table.target_z).world_to_pixel(p)
    r = cam.cylinder_radius_px
    assert cols.min() >= round(u) - r and cols.max() <= round(u) + r
    assert rows.min() >= round(v) - r and rows.max() <= round(v) + r


def test_mask_examples():
    a = np.full((4, 4, 3), 10, dtype=np.uint8)
    b = np.full((4, 4, 3), 20, dtype=np.uint8)
    assert np.all(vision.build_background_mask([a, b]) == 15)
    assert vision.build_background_mask([a, a]).tobytes() == a.tobytes()
    with pytest.raises(ValueError):
        vision.build_background_mask([a, np.zeros((3, 4, 3), dtype=np.uint8)])
    with pytest.raises(ValueError):
        vision.build_background_mask([])


def test_mask_keeps_table_color_over_sampling_area(table, mask, cam):
    cal = cam.calibration(table.target_z)
    rng = np.random.default_rng(1)
    for _ in range(300):
        u, v = cal.world_to_pixel(kinematics.sample_target(table, rng))
        px = mask[round(v), round(u)].astype(int)
        assert np.max(np.abs(px - np.array(vision.TABLE))) < 40


def test_extract_not_found_on_identical_image(mask, table, cam):
    assert vision.extract_target(mask.copy(), mask, 40, cam.calibration(table.target_z)) is None


def test_extract_errors(mask, table, cam):
    cal = cam.calibration(table.target_z)
    with pytest.raises(ValueError):
        vision.extract_target(mask[:10], mask, 40, cal)
    with pytest.raises(ValueError):
        vision.extract_target(mask, mask, 0, cal)


def test_extraction_accuracy_sweep():
    rows = np.array(vision.extraction_sweep(300, seed=0))
    assert not np.isnan(rows[:, 2]).any()
    err = np.abs(rows[:, 4:])
    assert np.all(err.mean(axis=0) <= 0.02)
    assert np.all(err.max(axis=0) <= 0.02)


def test_ppm_round_trip(tmp_path, chain, table):
    img = vision.render(chain, table, np.array([0.3, -0.5, 1.0, 0, 0, 0]), None)
    path = tmp_path / "scene.ppm"
    vision.write_ppm(path, img)
    assert path.read_bytes().startswith(b"P6\n256 256\n255\n")
    assert vision.read_ppm(path).tobytes() == img.tobytes()
    assert vision.decode_ppm(b"P6 # comment\n2 1\n255\n" + bytes(6)).shape == (1, 2, 3)
    with pytest.raises(ValueError):
        vision.decode_ppm(b"P3\n1 1\n255\n000")
    with pytest.raises(ValueError):
        vision.decode_ppm(b"P6\n4 4\n255\n" + bytes(5))


def test_ground_truth_injection_matches_evaluation():
    agent = make_agent(builtin_action_space("A1"), AgentConfig.defaults_for("td3", hidden=(16, 16)),
                       seed=0)
    a = evaluate_policy(agent, ReachingEnv(EpisodeConfig(), seed=9), 40)
    b = vision.eval_from_images(agent, ReachingEnv(EpisodeConfig(), seed=9), 40, ground_truth=True)
    assert a == b


def test_image_evaluation_runs_and_counts_failures(chain, table):
    agent = make_agent(builtin_action_space("A1"), AgentConfig.defaults_for("td3", hidden=(16, 16)),
                       seed=0)
    est = vision.ImageTargetEstimator(chain, table)
    rep = vision.eval_from_images(agent, ReachingEnv(EpisodeConfig(), seed=9), 20, est)
    assert rep.episode_count == 20 and rep.extraction_failures == 0

    blind = lambda env, obs: None
    rep = vision.eval_from_images(agent, ReachingEnv(EpisodeConfig(), seed=9), 5, blind)
    assert rep.extraction_failures == 5 and all(v == 0 for v in rep.success_rate.values())
