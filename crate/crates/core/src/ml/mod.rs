//! Classification: RBF SVM, forward feature selection, cross-validation and
//! grade-wise t-tests.

pub mod cv;
pub mod sfs;
pub mod svm;
pub mod ttest;

pub use cv::{cross_validate, pooled_cv_accuracy, select_and_fit, CvConfig, CvReport, Fitted, FoldReport, SampleSet, Selection};
pub use sfs::{forward_select, sequential_forward_selection, SfsConfig, SfsResult};
pub use svm::{train_svm, train_svm_columns, Prediction, SvmModel, SvmParams};
pub use ttest::{grade_ttest, student_t_test, TTest, TTestTable};
