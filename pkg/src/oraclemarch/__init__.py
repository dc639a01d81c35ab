"""Depth-oracle guided neural raymarching.

A dual-MLP renderer: a classification oracle predicts where along each view
ray the shading network should be sampled, cutting per-pixel cost by an
order of magnitude versus dense raymarching. Includes an analytic RGBD
ground-truth generator, from-scratch training, evaluation tooling, and an
interactive fly-through server.
"""

from .geom import Pose, Ray, UnifiedRay, ViewCell, circumscribed_sphere, sample_pose, unify_ray
from .kernels import BACKEND, NATIVE
from .net import AdamState, MLPConfig, MLPParams, adam_step, backward, flop_count, forward, init_params
from .oracle_targets import ClassTarget, DepthBins, DepthMap, build_targets
from .render import Pipeline, PipelineConfig, bce_loss, composite, opacity_loss, total_loss
from .sampling import DepthRange, EncodingConfig, SampleSet, encode_features, sample_from_pdf

__version__ = "0.1.0"
