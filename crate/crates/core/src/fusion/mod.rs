//! Multi-modal alignment and fusion.
//!
//! Lip embeddings arrive at video rate and are stretched to acoustic frames
//! by nearest-neighbour lookup; speaker embeddings are a single row tiled in
//! time. Fusion is concatenation or factorized attention, where a modality
//! scores `H` linear subspaces of the acoustic embedding. Spatial features
//! can be gated by the angle between speakers before they reach the
//! network.

pub mod attention;
pub mod block;
pub mod embedding;
pub mod gradcheck;
pub mod mask;
pub mod store;

pub use attention::{
    apply_feature_gate, factorized_attention_forward, factorized_attention_grad, rule_attention_weight,
    softmax_rows, FactorizedAttentionParams, FactorizedGrads, FactorizedOutput, RuleAttentionParams, DEFAULT_HEADS,
};
pub use block::{
    block_stack_forward, receptive_field, toy_block_forward, BlockParams, TrimodalConfig, TrimodalFusion,
};
pub use embedding::{
    concat_fuse, synthetic_lip_embeddings, synthetic_speaker_embedding, tile_speaker, upsample_nearest,
    EmbeddingKind, EmbeddingSequence, ACOUSTIC_DIM, LIP_DIM, SPEAKER_DIM,
};
pub use gradcheck::{run_fusion_checks, CheckDims, FusionCheckReport};
pub use mask::{apply_mask, mask_head, oracle_irm, IRM_EPS};
pub use store::{load_attention_params, save_attention_params};
