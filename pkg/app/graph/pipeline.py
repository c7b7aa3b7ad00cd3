"""
Пайплайн кадра: пики → маска → PGG → декодирование → наблюдение для трекера
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypedDict

import numpy as np
from langgraph.graph import StateGraph

from ..config.run_config import RunConfig
from ..core.errors import InvalidInputError
from ..core.grid import ScalarField, VectorField2
from ..core.pose import FrameBundle, Keypoint, Pose
from ..core.skeleton import Skeleton, default_skeleton
from ..grouping.pgg import refine_fields, refine_tie
from ..spatial.embedding import decode_sie
from ..spatial.heatmap import BinaryMask, extract_peaks, pose_mask
from ..grouping.decoder import greedy_decode
from ..temporal.embedding import decode_tie
from ..temporal.tracker import Detection, FrameObservation, OnlineTracker, Trajectory

logger = logging.getLogger(__name__)


class FrameState(TypedDict, total=False):
    bundle: FrameBundle
    peaks: List[List[Keypoint]]
    mask: BinaryMask
    ke: ScalarField
    sie: VectorField2
    poses: List[Pose]
    tie_forward: Optional[VectorField2]
    tie_backward: Optional[VectorField2]
    observation: FrameObservation


Stage = Callable[[FrameState], FrameState]

STAGES = ('peaks', 'mask', 'pgg', 'decode', 'observation')

# graph node names must not clash with state keys
NODE_NAMES = {
    'peaks': 'find_peaks',
    'mask': 'build_pose_mask',
    'pgg': 'group_embeddings',
    'decode': 'decode_poses',
    'observation': 'build_observation',
}


def match_ground_truth(pose: Pose, ground_truth: Sequence[Pose], radius: float) -> Optional[int]:
    """
    Person id of the ground-truth pose sharing the most keypoints within
    radius of the decoded ones; None when nothing is close.
    """
    best_id, best_hits = None, 0
    for gt in ground_truth:
        shared = [j for j in pose.present() if gt.has(j)]
        if not shared:
            continue
        d = np.linalg.norm(pose.positions()[shared] - gt.positions()[shared], axis=1)
        hits = int(np.sum(d <= radius))
        if hits > best_hits:
            best_id, best_hits = gt.person_id, hits
    return best_id


class FramePipeline:
    """
    Per-frame spatial pipeline.

    The stages are nodes of a compiled StateGraph over FrameState; run()
    can stop after any stage. The previous frame's mask is cached so the
    backward TIE can be refined on its own grid; without it the backward
    TIE is used unrefined.
    """

    def __init__(self, run_config: Optional[RunConfig] = None, skeleton: Optional[Skeleton] = None,
                 use_pgg: Optional[bool] = None):
        self.config = run_config or RunConfig()
        self.skeleton = skeleton or default_skeleton()
        self.use_pgg = self.config.pgg.enabled if use_pgg is None else use_pgg
        self.pgg_cfg = self.config.pgg_config()
        self.decode_cfg = self.config.decode_config(self.skeleton)
        self._nodes: Dict[str, Stage] = {
            'peaks': self._peaks,
            'mask': self._mask,
            'pgg': self._pgg,
            'decode': self._decode,
            'observation': self._observation,
        }
        self._graphs: Dict[str, object] = {}
        self.graph = self._graph_until(STAGES[-1])
        self._prev_mask: Optional[Tuple[int, BinaryMask]] = None
        self._he_warned = False

    def _build_graph(self, finish: str):
        workflow = StateGraph(FrameState)
        stages = STAGES[:STAGES.index(finish) + 1]
        for name in stages:
            workflow.add_node(NODE_NAMES[name], self._nodes[name])
        for source, target in zip(stages, stages[1:]):
            workflow.add_edge(NODE_NAMES[source], NODE_NAMES[target])
        workflow.set_entry_point(NODE_NAMES[stages[0]])
        workflow.set_finish_point(NODE_NAMES[finish])
        return workflow.compile()

    def _graph_until(self, finish: str):
        if finish not in STAGES:
            raise InvalidInputError(f"unknown pipeline stage '{finish}', expected one of {STAGES}")
        if finish not in self._graphs:
            self._graphs[finish] = self._build_graph(finish)
        return self._graphs[finish]

    def run(self, bundle: FrameBundle, until: Optional[str] = None) -> FrameState:
        if bundle.heatmaps.joint_count != self.skeleton.joint_count:
            raise InvalidInputError(
                f"{bundle.heatmaps.joint_count} heatmap channels for a {self.skeleton.joint_count}-joint skeleton"
            )
        graph = self._graph_until(until) if until else self.graph
        return graph.invoke({'bundle': bundle})

    def decode(self, bundle: FrameBundle) -> List[Pose]:
        return self.run(bundle, until='decode')['poses']

    def observe(self, bundle: FrameBundle) -> FrameObservation:
        return self.run(bundle)['observation']

    def _peaks(self, state: FrameState) -> FrameState:
        hm = self.config.heatmap
        return {'peaks': extract_peaks(state['bundle'].heatmaps, hm.nms_radius, hm.peak_threshold, hm.subpixel)}

    def _mask(self, state: FrameState) -> FrameState:
        return {'mask': pose_mask(state['bundle'].heatmaps, self.config.mask.tau)}

    def _pgg(self, state: FrameState) -> FrameState:
        bundle, mask = state['bundle'], state['mask']
        sie = decode_sie(bundle.svf)
        tie_f = tie_b = None
        if bundle.has_predecessor:
            tie_f, tie_b = decode_tie(bundle.tvf_forward), decode_tie(bundle.tvf_backward)
        if not self.use_pgg or mask.occupancy == 0:
            ke = bundle.ke
        else:
            ke, sie = refine_fields([bundle.ke, sie], mask, self.pgg_cfg)
            if tie_f is not None:
                tie_f = refine_tie(tie_f, mask, self.pgg_cfg)
                prev = self._prev_mask
                if prev is not None and prev[0] == bundle.time_index - 1 and prev[1].occupancy:
                    tie_b = refine_tie(tie_b, prev[1], self.pgg_cfg)
        self._prev_mask = (bundle.time_index, mask)
        return {'ke': ke, 'sie': sie, 'tie_forward': tie_f, 'tie_backward': tie_b}

    def _decode(self, state: FrameState) -> FrameState:
        poses = greedy_decode(state['peaks'], state['ke'], state['sie'], self.decode_cfg)
        logger.debug(f"[DECODE] t={state['bundle'].time_index}: {len(poses)} poses")
        return {'poses': poses}

    def _observation(self, state: FrameState) -> FrameState:
        bundle = state['bundle']
        detections = [Detection(pose, self._he_for(pose, bundle)) for pose in state['poses']]
        return {'observation': FrameObservation(
            time_index=bundle.time_index,
            detections=detections,
            sie=state['sie'],
            tie_forward=state['tie_forward'],
            tie_backward=state['tie_backward'],
            ke=state['ke'],
        )}

    def _he_for(self, pose: Pose, bundle: FrameBundle) -> Optional[np.ndarray]:
        """HE vector of the ground-truth person this pose decodes"""
        if not bundle.he_vectors:
            return None
        if not bundle.ground_truth:
            if not self._he_warned:
                logger.warning("[DECODE] frame carries HE vectors but no ground truth; HE cue disabled")
                self._he_warned = True
            return None
        person = match_ground_truth(pose, bundle.ground_truth, 2.0 * self.config.heatmap.sigma)
        he = bundle.he_for(person) if person is not None else None
        return he.vector if he is not None else None


class SequencePipeline:
    """Decode and track one sequence online"""

    def __init__(self, sequence_id: str, run_config: Optional[RunConfig] = None,
                 skeleton: Optional[Skeleton] = None, noise=None, use_pgg: Optional[bool] = None):
        self.sequence_id = sequence_id
        self.config = run_config or RunConfig()
        self.skeleton = skeleton or default_skeleton()
        self.frames = FramePipeline(self.config, self.skeleton, use_pgg)
        self.tracker = OnlineTracker(self.config.tracker_config(noise), self.skeleton)
        self.logger = logging.getLogger(f"{__name__}.{sequence_id}")
        self.decoded: Dict[int, List[Pose]] = {}

    def run(self, bundles: Sequence[FrameBundle]) -> List[Trajectory]:
        last_t = None
        for bundle in bundles:
            if last_t is not None and bundle.time_index <= last_t:
                raise InvalidInputError("frames must be time-ordered")
            last_t = bundle.time_index
            obs = self.frames.observe(bundle)
            ids = self.tracker.step(obs)
            self.decoded[bundle.time_index] = [
                d.pose.with_person_id(track_id) for d, track_id in zip(obs.detections, ids)
            ]
        trajectories = self.tracker.trajectories()
        self.logger.info(f"[TRACKER] {len(self.decoded)} frames → {len(trajectories)} trajectories "
                         f"(mode {self.tracker.cfg.mode.value})")
        return trajectories

    def tracked_frames(self) -> List[Tuple[int, List[Pose]]]:
        """Decoded poses per frame, person_id set to the track id"""
        return sorted(self.decoded.items())
