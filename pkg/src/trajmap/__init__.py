"""trajmap: compress episode replays into latent trajectories, cluster them into
major states, and lay the resulting transition graph out for interactive maps."""

from .abstraction import (
    AbstractGraph,
    MajorState,
    Transition,
    build_graph,
    build_major_states,
    median_latent,
    pca_project,
)
from .clustering import (
    NOISE,
    ClusterLabeling,
    StParams,
    default_params,
    neighborhood,
    st_dbscan,
    st_dbscan_oracle,
)
from .episodes import (
    Episode,
    LatentPoint,
    LatentTrajectory,
    encode_episode,
    load_episodes,
    read_frames_file,
    synth_moving_dot,
    write_frames_file,
)
from .errors import (
    ConsistencyError,
    FormatError,
    PipelineError,
    ShapeError,
    TrainingDiverged,
)
from .layout import (
    LayoutParams,
    NodePosition,
    build_force_links,
    default_layout_params,
    link_strength,
    simulate,
)
from .service import (
    GraphDocument,
    PipelineConfig,
    export_document,
    load_document,
    make_server,
    run_pipeline,
    serve,
    validate_document,
)
from .vae import (
    Architecture,
    Frame,
    GaussianPosterior,
    Layer,
    LossBreakdown,
    TrainConfig,
    VaeParams,
    beta_vae_loss,
    conv32_arch,
    decode,
    encode,
    init_params,
    kl_divergence,
    load_checkpoint,
    loss_gradient,
    mlp_arch,
    reconstruction_loss,
    reparameterize,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
