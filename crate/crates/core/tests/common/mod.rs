#![allow(dead_code)]

use std::sync::Arc;

use hedgerow_he::{keygen, ClearBackend, HeBackend, HeContext, HeParams, SecretKey};

pub struct Small {
    pub ctx: Arc<HeContext>,
    pub sk: SecretKey,
    pub he: HeBackend,
    pub clear: ClearBackend,
}

/// Small ring with the modulus chain of the tree presets.
pub fn small_params(depth: usize, widths: &[usize]) -> HeParams {
    HeParams::generate("test-small", 256, &[60, 60, 60, 60, 60, 60], 40, depth, widths).unwrap()
}

pub fn small(depth: usize, widths: &[usize]) -> Small {
    let params = small_params(depth, widths);
    let ctx = Arc::new(HeContext::new(params.clone()).unwrap());
    let (sk, pk, ek) = keygen(&ctx, [7; 32]);
    Small {
        he: HeBackend::new(ctx.clone(), pk, ek).unwrap(),
        clear: ClearBackend::new(params).unwrap(),
        ctx,
        sk,
    }
}

impl Small {
    pub fn decrypt(&self, ct: &hedgerow_he::Ciphertext) -> Vec<i64> {
        self.ctx
            .decrypt(&self.sk, ct)
            .unwrap()
            .decode_signed(self.ctx.params())
    }

    pub fn reveal(&self, ct: &hedgerow_he::ClearCiphertext) -> Vec<i64> {
        self.clear.reveal(ct).unwrap().decode_signed(self.ctx.params())
    }
}
