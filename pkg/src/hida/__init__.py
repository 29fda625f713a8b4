"""Indoor point-cloud instance grouping and navigation-assist toolkit."""

from hida.cloudio import (
    ClassTable,
    CloudError,
    CloudFormatError,
    GroundTruthInstances,
    LabeledCloud,
    OracleConfig,
    SceneObject,
    SceneSpec,
    load_cloud,
    oracle_predict,
    random_scene_spec,
    save_cloud,
    synth_scene,
)
from hida.preprocess import (
    PreprocessConfig,
    PreprocessError,
    VoxelIndexCloud,
    downsample_even,
    preprocess,
    remove_outliers,
    voxelize,
)
from hida.grouping import (
    ClusterConfig,
    ClusterProposal,
    InstancePrediction,
    cluster_branch,
    nms,
    score_proposal,
    score_proposals,
    segment_instances,
)
from hida.evalmetrics import (
    MAP_IOU_THRESHOLDS,
    ApResult,
    EmptyGroundTruthError,
    evaluate,
    match_and_ap,
)
from hida.topview import (
    SECTOR_COUNT,
    EgoPoint,
    FeaturePoints,
    Pose2D,
    TopViewInstance,
    TopViewScene,
    bearing_sector,
    build_topview,
    to_ego,
)
from hida.assist import (
    AvoidanceAnswer,
    AvoidanceQuery,
    FindAnswer,
    FindQuery,
    SECTOR_NAMES,
    avoid,
    find_object,
    narrate,
)

__version__ = "0.1.0"
