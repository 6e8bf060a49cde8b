//! Key directories: `params.txt`, `secret.key`, `public.key`, `eval.key`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use hedgerow_he::{EvalKeys, HeBackend, HeContext, HeParams, PublicKey, SecretKey};

use crate::error::CliError;

pub const PARAMS_FILE: &str = "params.txt";
pub const SECRET_FILE: &str = "secret.key";
pub const PUBLIC_FILE: &str = "public.key";
pub const EVAL_FILE: &str = "eval.key";

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let path = dir.join(name);
    fs::read(&path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_params(dir: &Path) -> Result<HeParams> {
    let text = String::from_utf8(read(dir, PARAMS_FILE)?)
        .map_err(|_| CliError::validation("params.txt is not UTF-8"))?;
    Ok(HeParams::from_text(&text)?)
}

/// Writes the public material, and the secret key when given.
pub fn write_keys(
    dir: &Path,
    params: &HeParams,
    sk: Option<&SecretKey>,
    pk: &PublicKey,
    ek: &EvalKeys,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(PARAMS_FILE), params.to_text())?;
    if let Some(sk) = sk {
        fs::write(dir.join(SECRET_FILE), sk.to_bytes())?;
    }
    fs::write(dir.join(PUBLIC_FILE), pk.to_bytes())?;
    fs::write(dir.join(EVAL_FILE), ek.to_bytes())?;
    Ok(())
}

/// Server key set. Refuses any directory that holds a secret key.
pub fn load_server(dir: &Path) -> Result<HeBackend> {
    if dir.join(SECRET_FILE).exists() {
        return Err(CliError::validation(format!(
            "refusing to run: {} contains {SECRET_FILE}; the server must hold public keys only",
            dir.display()
        ))
        .into());
    }
    let params = load_params(dir)?;
    let pk = PublicKey::from_bytes(&read(dir, PUBLIC_FILE)?, &params)?;
    let ek = EvalKeys::from_bytes(&read(dir, EVAL_FILE)?, &params)?;
    let ctx = Arc::new(HeContext::new(params)?);
    Ok(HeBackend::new(ctx, pk, ek)?)
}

/// Context and public key for encryption.
pub fn load_encryptor(dir: &Path) -> Result<(Arc<HeContext>, PublicKey)> {
    let params = load_params(dir)?;
    let pk = PublicKey::from_bytes(&read(dir, PUBLIC_FILE)?, &params)?;
    Ok((Arc::new(HeContext::new(params)?), pk))
}

/// Context and secret key for decryption.
pub fn load_decryptor(dir: &Path) -> Result<(Arc<HeContext>, SecretKey)> {
    let params = load_params(dir)?;
    let sk = SecretKey::from_bytes(&read(dir, SECRET_FILE)?, &params)?;
    Ok((Arc::new(HeContext::new(params)?), sk))
}
