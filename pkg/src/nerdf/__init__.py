"""Single-forwarding view synthesis via per-ray radiance distributions."""

from .checkpoint import Checkpoint, checkpoint_sha256, load_checkpoint, save_checkpoint
from .config import SceneConfig, builtin_scene, load_scene_config, resolve_scene
from .distill import DistillConfig, TrainBatch, distill_step, normalize_density, ovs_batch, render_loss, train_nelf_baseline, train_student, vdc_loss
from .distribution import (
    FourierCoeffs,
    RenderConfig,
    basis_eval,
    basis_matrix,
    decode_distribution,
    nerdf_render_ray,
    render_image,
    render_rays,
    volume_render,
)
from .encoding import EncodedRay, EncodingConfig, encode_ray, encode_rays, positional_encode, sh_encode
from .errors import ConfigError, DivergenceError, FormatError, InputError, NerdfError, StructuralError
from .field import AnalyticScene, GaussianBlob, MicroNerf, field_query, teacher_render_ray, train_micro_nerf
from .geometry import CameraPose, PoseRegion, Ray, ray_from_pixel, sample_pose_ovs, stratified_samples, uniform_samples
from .metrics import Image, TimingBreakdown, benchmark_render, psnr
from .nn import AdamState, MLPParams, Tape, adam_step, init_adam, init_mlp, mlp_backward, mlp_forward

__version__ = "0.1.0"
