use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use base64::Engine;
use rcgen::{BasicConstraints, CertificateParams, CertifiedIssuer, DnType, IsCa, KeyPair, KeyUsagePurpose, PublicKeyData};
use rustls::pki_types::{CertificateDer, PrivateKeyDer, PrivatePkcs8KeyDer};
use rustls::ServerConfig;
use sha2::{Digest, Sha256};

use crate::{ReplayError, Result};

/// Throwaway CA minting one leaf certificate per intercepted host. All
/// leaves share a key so a browser can trust them through a single SPKI pin.
pub struct InterceptionCa {
    issuer: CertifiedIssuer<'static, KeyPair>,
    leaf_key: KeyPair,
    configs: Mutex<HashMap<String, Arc<ServerConfig>>>,
}

fn tls_err(e: impl std::fmt::Display) -> ReplayError {
    ReplayError::Tls(e.to_string())
}

impl InterceptionCa {
    pub fn generate() -> Result<Self> {
        let mut params = CertificateParams::new(Vec::<String>::new()).map_err(tls_err)?;
        params.distinguished_name.push(DnType::CommonName, "breakscan interception CA");
        params.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
        params.key_usages = vec![KeyUsagePurpose::KeyCertSign, KeyUsagePurpose::CrlSign];
        let issuer = CertifiedIssuer::self_signed(params, KeyPair::generate().map_err(tls_err)?).map_err(tls_err)?;
        Ok(Self {
            issuer,
            leaf_key: KeyPair::generate().map_err(tls_err)?,
            configs: Mutex::new(HashMap::new()),
        })
    }

    pub fn ca_pem(&self) -> String {
        self.issuer.pem()
    }

    pub fn ca_der(&self) -> CertificateDer<'static> {
        self.issuer.der().clone()
    }

    /// Base64 SHA-256 of the leaf public key, the form Chrome's
    /// `--ignore-certificate-errors-spki-list` expects.
    pub fn spki_pin(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(Sha256::digest(self.leaf_key.subject_public_key_info()))
    }

    pub fn server_config(&self, host: &str) -> Result<Arc<ServerConfig>> {
        let mut configs = self.configs.lock().unwrap();
        if let Some(c) = configs.get(host) {
            return Ok(c.clone());
        }
        let mut params = CertificateParams::new(vec![host.to_string()]).map_err(tls_err)?;
        params.distinguished_name.push(DnType::CommonName, host);
        let leaf = params.signed_by(&self.leaf_key, &self.issuer).map_err(tls_err)?;
        let key = PrivateKeyDer::Pkcs8(PrivatePkcs8KeyDer::from(self.leaf_key.serialize_der()));
        let provider = Arc::new(rustls::crypto::aws_lc_rs::default_provider());
        let mut cfg = ServerConfig::builder_with_provider(provider)
            .with_safe_default_protocol_versions()
            .map_err(tls_err)?
            .with_no_client_auth()
            .with_single_cert(vec![leaf.der().clone(), self.ca_der()], key)
            .map_err(tls_err)?;
        cfg.alpn_protocols = vec![b"http/1.1".to_vec()];
        let cfg = Arc::new(cfg);
        configs.insert(host.to_string(), cfg.clone());
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaves_are_cached_per_host() {
        let ca = InterceptionCa::generate().unwrap();
        assert!(ca.ca_pem().starts_with("-----BEGIN CERTIFICATE-----"));
        let a = ca.server_config("a.test").unwrap();
        assert!(Arc::ptr_eq(&a, &ca.server_config("a.test").unwrap()));
        assert!(!Arc::ptr_eq(&a, &ca.server_config("b.test").unwrap()));
        assert_eq!(ca.spki_pin().len(), 44);
    }
}
