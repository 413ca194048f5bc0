"""Data-quality evaluation and pruning for multi-sensor driving datasets.

Measures cross-camera and camera-LiDAR redundancy on a canonical
manifest format, scores annotation completeness inside overlap crops,
prunes redundant annotations/points and emits plot-ready reports.
"""

from .dataset import (Annotation2D, Annotation3D, Box2D, Box3D, CameraSpec,
                      CameraView, DatasetManifest, Frame, LidarSpec, LidarView,
                      SensorRig, load_manifest, load_points, load_rig,
                      normalize_deg, save_points, write_manifest)
from .geometry import (AngularInterval, OverlapPair, angle_to_column,
                       box3d_corners, centroid_distance, clip_box2d,
                       column_to_angle, find_overlap_pairs, fov_interval,
                       iou2d, iou3d, iou_bev, mc_iou3d)
from .multimodal import (Detection3D, DetectionSet, PruneOutcome,
                         RedundancyResult, distance_redundancy_groups,
                         load_detection_sets, lost_ratio,
                         prune_by_distance, prune_manifest_by_distance,
                         prune_points_by_distance, redundancy_ratio,
                         save_detection_sets, sweep_distance)
from .multisource import (BcsDecision, BcsSweepEntry, CropSimilarity,
                          GroupMember, RedundantGroup, apply_bcs_pruning, bcs,
                          cosine_similarity, crop_region, crop_similarity,
                          find_redundant_groups, prune_dataset, sweep_bcs)
from .report import (DqDimension, DqDimensionTag, build_report,
                     similarity_rows, write_json)
from .stats import TTestResult, betainc, t_two_sided_p, welch_ttest
from .synth import (GroundTruth, SynthResult, SynthSpec, generate_synthetic,
                    nuscenes_like_rig, write_dataset)

__version__ = "0.1.0"
