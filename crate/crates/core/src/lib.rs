pub mod batch;
pub mod dot;
pub mod dsl;
pub mod engine;
pub mod event;
pub mod model;
pub mod modelib;
pub mod scenarios;
pub mod span;
pub mod trace_file;
pub mod validator;
pub mod value;
