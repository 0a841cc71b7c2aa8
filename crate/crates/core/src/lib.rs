pub mod certify;
pub mod error;
pub mod linalg;
pub mod seeding;
pub mod segre;
pub mod shape;
pub mod survey;
pub mod tangency;
