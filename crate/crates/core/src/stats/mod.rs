pub mod clinical;
pub mod ols;
pub mod records;
pub mod special;

pub use clinical::{
    build_design_matrix, fit_joint_models, fit_model, fit_single_predictor_models, format_coef_ci,
    format_p, format_p_with_stars, motor_nihss, significance_stars, Design, ModelFit,
    MotorNihssComponents, Outcome, Predictor, PredictorSet, Sex, SubjectFlags, SubjectRecord,
    Treatment,
};
pub use ols::{ols_fit, ols_fit_named, Matrix, RegressionResult};
pub use special::{t_cdf, t_quantile, t_two_sided_p};
