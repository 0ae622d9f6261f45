//! wasm-bindgen wrapper around [`demo::Demo`]; every call returns JSON for the page.

pub mod demo;

use serde::Serialize;
use wasm_bindgen::prelude::*;

pub use demo::{Demo, DemoError};

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("view serializes")
}

fn js(e: DemoError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct PitsDemo(Demo);

#[wasm_bindgen]
impl PitsDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(depth_p: u8, size_p: u16, seed: u32) -> PitsDemo {
        PitsDemo(Demo::new(depth_p, size_p, seed.into()))
    }

    /// `tick` is milliseconds into the epoch.
    pub fn add_log(&mut self, text: &str, tick: u32) -> Result<usize, JsError> {
        self.0.add_log(text, tick.into()).map_err(js)
    }

    pub fn add_random(&mut self, n: usize) -> Result<(), JsError> {
        self.0.add_random(n).map_err(js)
    }

    pub fn seal(&mut self) -> Result<String, JsError> {
        self.0.seal().map_err(js)
    }

    pub fn receipt(&self, id: usize) -> Result<String, JsError> {
        self.0.receipt(id).map(|r| json(&r)).map_err(js)
    }

    pub fn tamper(&mut self, id: usize, delete: bool) -> Result<(), JsError> {
        self.0.tamper(id, delete).map_err(js)
    }

    pub fn insert(&mut self, text: &str, tick: u32) -> Result<usize, JsError> {
        self.0.insert(text, tick.into()).map_err(js)
    }

    pub fn audit(&mut self) -> Result<String, JsError> {
        self.0.audit().map(|a| json(&a)).map_err(js)
    }

    pub fn view(&self) -> String {
        json(&self.0.view())
    }
}
