pub mod corpus;
pub mod evalmetrics;
pub mod textprep;
pub mod lingfeat;
pub mod classify;
pub mod synth;
pub mod weaksup;
pub mod extract;
pub mod pipeline;
