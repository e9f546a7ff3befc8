"""Defect detection for periodic metallic-mesh images.

The pipeline extracts two binary priors (a frequency-domain one for
block defects and a voting-geometry one for broken lines), turns them
into per-pixel sparse-penalty weights, decomposes the image into
background + defects + noise, and segments the defect matrix with a
double threshold. A synthetic mesh generator and a serpentine scan
planner make everything testable without hardware.
"""

from .evaluation import (ConfusionCounts, GridSearchResult, MetricsReport,
                         confusion, f_score, grid_search, metrics)
from .hough import (CircleParam, HoughConfig, LineParam, broken_line_prior,
                    draw_primitives, hough_circles, hough_lines)
from .image import (binarize, dilate, load_gray, load_mask, mask_union,
                    otsu_threshold, save_gray, save_mask)
from .optics import (OpticsSpec, digital_magnification, object_pixel_pitch,
                     optical_magnification, spec_report)
from .pipeline import (DetectionResult, PipelineConfig, config_for_mesh,
                       detect, matched_radius_range, matched_sides)
from .rpca import (Decomposition, SolverConfig, lowrank_prox, noise_update,
                   objective, solve, sparse_prox)
from .scanning import (RegionDetection, ScanPlan, cut_tiles, detect_over_region,
                       plan_s_path, stitch, stitch_masks)
from .segmentation import SegmentationResult, auto_thresholds, double_threshold
from .spectral import (FusionWeights, apply_square_lowpass, block_defect_prior,
                       fft2_centered, fuse, ifft2, ifft2_with_residue)
from .synth import (DatasetItem, DefectSpec, MeshSpec, generate, load_dataset,
                    make_dataset, write_dataset)
from .weights import build_weight, graded_weight

__version__ = "0.1.0"
