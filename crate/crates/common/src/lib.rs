//! Shared helpers for the breakscan workspace.
//!
//! Everything here is deterministic and offline: URL canonicalization,
//! request keys with volatile query parameters removed, registrable-domain
//! lookup against the public-suffix snapshot compiled into the `psl` crate,
//! and SHA-256 content hashing.

pub mod domain;
pub mod hash;
pub mod mime;
pub mod urls;

pub use domain::{is_same_site, registrable_domain};
pub use hash::sha256_hex;
pub use mime::mime_for_path;
pub use urls::{canonical_key, canonicalize_url, host_of, UrlError, VolatileParams};
