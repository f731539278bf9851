"""Monocular 3D centroid reasoning, object-aware voting and KITTI-style evaluation."""

from .centroid import (DEFAULT_GRID, DepthErrorStats, HeightPrior, ProposalGrid,
                       centroid_proposals, depth_error_stats, estimate_depth,
                       fit_height_prior, grid_coordinates)
from .errors import (BehindCameraError, DegenerateBoxError, DomainError, FormatError,
                     MonovoteError, ParseError, ValidationError)
from .evaluation import (EASY, HARD, MODERATE, DifficultyRegime, EvalConfig, MceCurve,
                         average_precision, filter_by_difficulty, iou_3d, iou_bev,
                         match_and_score, mce_curve)
from .fitting import fit_gaussian_kl, fit_gaussian_mle, fit_linear_head
from .geometry import (Box2D, Box3D, CameraIntrinsics, backproject, bev_footprint,
                       box3d_corners, project_box3d_to_box2d, project_point)
from .kitti_io import (DetectionRecord, GroundTruthObject, parse_calibration,
                       parse_detection_line, parse_label_line, write_detection_line)
from .losses import (LossWeights, OrientationEncoding, bce, decode_orientation,
                     dimension_loss, encode_orientation, kl_gaussian, multitask_loss,
                     orientation_loss, smooth_l1)
from .voting import (GaussianOffsetModel, LinearHead, fuse_late, geometric_confidence,
                     normalize_votes, vote_location)

__version__ = "0.1.0"
