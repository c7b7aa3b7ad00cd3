"""
Тесты онлайн-трекера и базовых мер сходства
"""
import math

import numpy as np
import pytest

from app.core.errors import InvalidInputError
from app.core.grid import GridShape, ScalarField, VectorField2
from app.core.skeleton import simple_skeleton
from app.simulator.fields import NoiseConfig, simulate
from app.simulator.scene import OcclusionWindow, SceneConfig
from app.temporal.tracker import (
    Detection,
    FrameObservation,
    MetricMode,
    OnlineTracker,
    TrackerConfig,
    Trajectory,
    associate,
    box_iou,
    iou_similarity,
    oks_similarity,
    track_sequence,
)

from conftest import make_pose

PAIR = simple_skeleton(('head_top', 'neck'))
GRID = GridShape(32, 32)


def _detection(x, he):
    return Detection(make_pose([(x, 10.0), (x, 20.0)]), np.array([he], dtype=np.float64))


def _seed_tracks(hes):
    tracks = []
    for track_id, he in enumerate(hes):
        track = Trajectory(track_id)
        track.add(0, make_pose([(10.0 * track_id, 10.0), (10.0 * track_id, 20.0)]), np.array([he]))
        tracks.append(track)
    return tracks


def _constant(vector):
    return VectorField2(GRID, np.broadcast_to(np.asarray(vector, dtype=np.float64), (32, 32, 2)).copy())


def _tie_observation(t, detections, tie_forward):
    """SIE, предыдущий SIE и T′ нулевые; T постоянное"""
    return FrameObservation(t, detections, sie=VectorField2.zeros(GRID),
                            tie_forward=_constant(tie_forward), tie_backward=VectorField2.zeros(GRID))


def _split_ke(left, right):
    """KE = left при x < 5, right правее"""
    values = np.full((32, 32), float(right))
    values[:, :5] = left
    return ScalarField(GRID, values)


class TestSimilarities:
    """Тесты OKS и IoU"""

    def test_oks_identical(self):
        """Тест: одинаковые позы → 1.0"""
        pose = make_pose([(1.0, 2.0), (3.0, 4.0)])
        assert oks_similarity(pose, pose, 10.0, PAIR.kappas) == 1.0

    def test_oks_one_joint_offset(self):
        """Тест: сдвиг одного сустава на √2·s·κ → (1 + e⁻¹)/2"""
        scale, kappa = 10.0, PAIR.kappas[1]
        a = make_pose([(0.0, 0.0), (5.0, 5.0)])
        b = make_pose([(0.0, 0.0), (5.0 + math.sqrt(2.0) * scale * kappa, 5.0)])
        assert oks_similarity(a, b, scale, PAIR.kappas) == pytest.approx(0.683940, abs=1e-6)

    def test_oks_monotone(self):
        """Тест: OKS убывает с ростом смещения"""
        a = make_pose([(0.0, 0.0), (5.0, 5.0)])
        values = [oks_similarity(a, make_pose([(d, 0.0), (5.0 + d, 5.0)]), 10.0, PAIR.kappas)
                  for d in (0.5, 1.0, 2.0)]
        assert 1.0 > values[0] > values[1] > values[2]

    def test_oks_no_shared_joints(self):
        """Тест: нет общих суставов → 0"""
        a = make_pose([(0.0, 0.0), None])
        b = make_pose([None, (0.0, 0.0)])
        assert oks_similarity(a, b, 10.0, PAIR.kappas) == 0.0

    def test_box_iou(self):
        """Тест: [0,0,10,10] и [5,0,15,10] → 1/3; непересекающиеся → 0"""
        assert box_iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(0.333333, abs=1e-6)
        assert box_iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0

    def test_iou_poses(self):
        """Тест: одинаковые позы → 1.0, вырожденная рамка → 1-px"""
        pose = make_pose([(0.0, 0.0), (10.0, 10.0)])
        assert iou_similarity(pose, pose) == 1.0
        point = make_pose([(3.0, 3.0), None])
        assert iou_similarity(point, point) == 1.0


class TestAssociate:
    """Тесты одного шага сопоставления"""

    def test_cold_start(self):
        """Тест: без треков каждая поза рождает трек"""
        obs = FrameObservation(0, [_detection(5.0, 0.0), _detection(40.0, 9.0)])
        tracks, ids, next_id = associate(obs.detections, [], obs, TrackerConfig(), 0, PAIR)
        assert ids == [0, 1]
        assert next_id == 2
        assert len(tracks) == 2

    def test_ids_preserved(self):
        """Тест: верные пары дешевле перекрёстных → id сохраняются"""
        tracks = _seed_tracks([0.0, 10.0])
        detections = [_detection(12.0, 10.1), _detection(1.0, 0.2)]
        obs = FrameObservation(1, detections)
        tracks, ids, next_id = associate(detections, tracks, obs, TrackerConfig(), 2, PAIR)
        assert ids == [1, 0]
        assert next_id == 2

    def test_gated_pair_births_new_track(self):
        """Тест: стоимость выше порога → новый id, хотя столбец свободен"""
        tracks = _seed_tracks([0.0])
        obs = FrameObservation(1, [_detection(1.0, 100.0)])
        tracks, ids, next_id = associate(obs.detections, tracks, obs, TrackerConfig(), 1, PAIR)
        assert ids == [1]
        assert next_id == 2

    def test_stale_track_dropped(self):
        """Тест: трек старше max_age исключается"""
        tracks = _seed_tracks([0.0])
        obs = FrameObservation(3, [_detection(1.0, 0.0)])
        tracks, ids, _ = associate(obs.detections, tracks, obs, TrackerConfig(max_age=1), 1, PAIR)
        assert ids == [1]
        assert [tr.track_id for tr in tracks] == [1]

    def test_oks_mode(self):
        """Тест: режим OKS сопоставляет по положению"""
        tracks = _seed_tracks([0.0, 10.0])
        detections = [_detection(10.5, 0.0), _detection(0.5, 10.0)]
        obs = FrameObservation(1, detections)
        cfg = TrackerConfig(mode=MetricMode.OKS)
        _, ids, _ = associate(detections, tracks, obs, cfg, 2, PAIR)
        assert ids == [1, 0]

    def test_combined_cost_above_theta_severed(self):
        """Тест: HE совпадает, но Ψ = 3·0 + 900 > θ_gate = 300 → новый id"""
        tracks = _seed_tracks([0.0])
        obs = _tie_observation(1, [_detection(0.0, 0.0)], (30.0, 30.0))
        cfg = TrackerConfig()
        _, ids, next_id = associate(obs.detections, tracks, obs, cfg, 1, PAIR, prev_sie=VectorField2.zeros(GRID))
        assert cfg.theta_gate == 300.0
        assert ids == [1]
        assert next_id == 2

    def test_combined_cost_within_theta_kept(self):
        """Тест: Ψ_TIE = 9, HE совпадает → трек продолжается"""
        tracks = _seed_tracks([0.0])
        obs = _tie_observation(1, [_detection(0.0, 0.0)], (3.0, 3.0))
        _, ids, _ = associate(obs.detections, tracks, obs, TrackerConfig(), 1, PAIR,
                              prev_sie=VectorField2.zeros(GRID))
        assert ids == [0]

    def test_theta_gate_binds_when_each_cue_passes(self):
        """Тест: 3·30 ≤ 250 и 16 ≤ 50, но сумма 106 > θ_gate = 100 → разрыв"""
        tracks = _seed_tracks([0.0])
        obs = _tie_observation(1, [_detection(0.0, math.sqrt(30.0))], (4.0, 4.0))
        cfg = TrackerConfig(gate_he=250.0, gate_tie=50.0, sever_gate=100.0)
        _, ids, _ = associate(obs.detections, tracks, obs, cfg, 1, PAIR, prev_sie=VectorField2.zeros(GRID))
        assert ids == [1]
        relaxed = TrackerConfig(gate_he=250.0, gate_tie=50.0, sever_gate=110.0)
        _, ids, _ = associate(obs.detections, _seed_tracks([0.0]), obs, relaxed, 1, PAIR,
                              prev_sie=VectorField2.zeros(GRID))
        assert ids == [0]

    def test_theta_gate_binds_single_cue_mode(self):
        """Тест: he_only, 3·40 = 120 ≤ gate_he, но > θ_gate = 100 → разрыв"""
        obs = FrameObservation(1, [_detection(0.0, math.sqrt(40.0))])
        cfg = TrackerConfig(mode=MetricMode.HE_ONLY, sever_gate=100.0)
        _, ids, _ = associate(obs.detections, _seed_tracks([0.0]), obs, cfg, 1, PAIR)
        assert ids == [1]
        _, ids, _ = associate(obs.detections, _seed_tracks([0.0]), obs, TrackerConfig(mode=MetricMode.HE_ONLY), 1, PAIR)
        assert ids == [0]

    def test_ke_sie_mode(self):
        """Тест: базовый режим KE/SIE сопоставляет по значениям KE у суставов"""
        tracks = _seed_tracks([0.0, 0.0])
        detections = [_detection(11.0, 0.0), _detection(1.0, 0.0)]
        obs = FrameObservation(1, detections, sie=VectorField2.zeros(GRID), ke=_split_ke(0.0, 10.0))
        cfg = TrackerConfig(mode=MetricMode.KE_SIE)
        _, ids, _ = associate(detections, tracks, obs, cfg, 2, PAIR,
                              prev_sie=VectorField2.zeros(GRID), prev_ke=_split_ke(0.0, 10.0))
        assert ids == [1, 0]

    def test_ke_sie_needs_previous_fields(self):
        """Тест: без полей кадра t−1 режим KE/SIE рождает новые треки"""
        tracks = _seed_tracks([0.0])
        obs = FrameObservation(1, [_detection(0.0, 0.0)], sie=VectorField2.zeros(GRID), ke=_split_ke(0.0, 10.0))
        _, ids, _ = associate(obs.detections, tracks, obs, TrackerConfig(mode='ke_sie'), 1, PAIR)
        assert ids == [1]


class TestTrackerConfig:
    """Тесты конфигурации трекера"""

    def test_gate_sum(self):
        """Тест: θ_gate = сумма порогов, with_gate задаёт оба порога и θ_gate"""
        assert TrackerConfig(gate_he=10, gate_tie=5).theta_gate == 15
        cfg = TrackerConfig.with_gate(7.0)
        assert (cfg.gate_he, cfg.gate_tie, cfg.theta_gate) == (7.0, 7.0, 7.0)

    def test_validation(self):
        """Тест: неположительные пороги отклоняются"""
        with pytest.raises(InvalidInputError):
            TrackerConfig(gate_he=0.0)
        with pytest.raises(ValueError):
            TrackerConfig(mode='unknown')

    def test_calibrated_grows_with_noise(self):
        """Тест: калиброванные пороги растут с шумом"""
        quiet = TrackerConfig.calibrated(NoiseConfig(he_dim=64, he_jitter=0.01, vector_jitter=0.1))
        loud = TrackerConfig.calibrated(NoiseConfig(he_dim=64, he_jitter=0.2, vector_jitter=1.0))
        assert loud.gate_he > quiet.gate_he
        assert loud.gate_tie > quiet.gate_tie


class TestTrackSequence:
    """Тесты трекинга по последовательности"""

    def test_noiseless_two_people(self, noiseless_scene):
        """Тест: сцена без шума → два трека на все кадры"""
        generated, bundles = noiseless_scene
        trajectories = track_sequence(bundles, TrackerConfig(), skeleton=generated.skeleton)
        assert len(trajectories) == 2
        assert all(tr.times == list(range(len(bundles))) for tr in trajectories)

    def test_ke_sie_baseline_noiseless(self, noiseless_scene):
        """Тест: базовый трекер KE/SIE на точных полях держит оба трека"""
        generated, bundles = noiseless_scene
        trajectories = track_sequence(bundles, TrackerConfig(mode=MetricMode.KE_SIE), skeleton=generated.skeleton)
        assert len(trajectories) == 2
        assert all(tr.times == list(range(len(bundles))) for tr in trajectories)

    def test_reappearance_gets_new_id(self):
        """Тест: человек пропал на три кадра → после возвращения новый id"""
        scene = SceneConfig(person_count=2, frame_count=9, seed=5,
                            occlusions=(OcclusionWindow(person=1, start=3, length=3),))
        generated, bundles = simulate(scene, NoiseConfig.zero(he_dim=16))
        trajectories = track_sequence(bundles, TrackerConfig(max_age=1), skeleton=generated.skeleton)
        assert len(trajectories) == 3

    def test_empty_sequence(self):
        """Тест: пустая последовательность → нет треков"""
        assert track_sequence([]) == []

    def test_online_tracker_collects_finished(self):
        """Тест: завершённые треки остаются в выдаче"""
        tracker = OnlineTracker(TrackerConfig(), PAIR)
        tracker.step(FrameObservation(0, [_detection(5.0, 0.0)]))
        tracker.step(FrameObservation(1, []))
        tracker.step(FrameObservation(2, []))
        tracker.step(FrameObservation(3, [_detection(5.0, 0.0)]))
        assert [tr.track_id for tr in tracker.trajectories()] == [0, 1]
