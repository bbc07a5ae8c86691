#![allow(dead_code)]

use flipflop_core::{Model, ModelParams};

pub fn model_with(edit: impl FnOnce(&mut ModelParams)) -> Model {
    let base = Model::reference();
    let mut p = base.params.clone();
    edit(&mut p);
    base.with_params(p).expect("valid parameters")
}

pub fn reference() -> Model {
    Model::reference()
}
