"""Progressive curriculum alignment of pseudo-word prototypes under domain shift.

A numpy implementation of ambiguity/signal-guided curriculum sampling for
cross-modal projection heads, together with a synthetic embedding-space world
for studying alignment stability under feature-level corruptions.
"""

from pica.core import (
    DegenerateInputError,
    TierPartition,
    cosine_matrix,
    cosine_sim,
    partition_tiers,
    z_normalize,
)
from pica.head import ProjectionHead, init_head, project, project_pair
from pica.losses import (
    GradientSet,
    LossBreakdown,
    curriculum_loss,
    grounding_loss,
    info_nce,
    total_loss,
)
from pica.metrics import ai_gap, delta_h, domain_mean, gcs, novel_retrieval_score, overall_mean
from pica.proxies import NegativePool, ProxyScores, compute_proxies, hardest_negative, queue_push
from pica.sampler import CurriculumConfig, SamplerOutput, sample_curriculum, schedule_alpha, target_ratios
from pica.world import CorruptionSpec, RegionSample, WorldSpec, augment, generate_world, sample_regions

__version__ = "0.1.0"
