pub mod dataset;
pub mod retrieval;
pub mod synthetic;
pub mod llm;
pub mod prompts;
pub mod parse;
pub mod demo;
pub mod infer;
pub mod eval;
pub mod run;
