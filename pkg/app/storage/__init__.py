from .container import MAGIC, decode_container, encode_container, read_container, write_container
from .files import atomic_write, read_json, write_json
from .sequence import (
    FRAME_PATTERN,
    GROUND_TRUTH_NAME,
    MANIFEST_NAME,
    LoadedSequence,
    SequenceManifest,
    bundle_to_tensors,
    load_ground_truth,
    load_manifest,
    load_sequence,
    poses_document,
    read_poses,
    read_predictions,
    read_tracks,
    save_sequence,
    tensors_to_bundle,
    write_poses,
    write_tracks,
)

__all__ = [
    'MAGIC', 'decode_container', 'encode_container', 'read_container', 'write_container',
    'atomic_write', 'read_json', 'write_json',
    'FRAME_PATTERN', 'GROUND_TRUTH_NAME', 'MANIFEST_NAME', 'LoadedSequence', 'SequenceManifest',
    'bundle_to_tensors', 'load_ground_truth', 'load_manifest', 'load_sequence', 'poses_document',
    'read_poses', 'read_predictions', 'read_tracks',
    'save_sequence', 'tensors_to_bundle', 'write_poses', 'write_tracks',
]
