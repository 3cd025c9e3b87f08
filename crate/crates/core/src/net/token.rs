use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::model::{AgentId, AgentView, Token};

/// Per-run secret of one agent.
#[derive(Clone, PartialEq, Eq)]
pub struct AgentKey([u8; 32]);

impl std::fmt::Debug for AgentKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AgentKey(..)")
    }
}

impl AgentKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        AgentKey(bytes)
    }

    /// Key drawn from a run seed; distinct agents get independent streams.
    pub fn derive(seed: u64, agent: AgentId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(agent.index() as u64 + 1);
        AgentKey(rng.random())
    }
}

/// SHA-256 over the key, then the count and global ids of the agent's true
/// private facts in ascending order, as 4-byte big-endian words.
pub fn encrypt_private_part(view: &AgentView, local: &FixedBitSet, key: &AgentKey) -> Token {
    let ids: Vec<u32> =
        view.private_local().iter().filter(|l| local.contains(**l as usize)).map(|l| view.known_fact(*l).0).collect();
    digest_fact_ids(&ids, key)
}

pub fn digest_fact_ids(sorted_ids: &[u32], key: &AgentKey) -> Token {
    let mut h = Sha256::new();
    h.update(b"maplanner-token-v1");
    h.update(key.0);
    h.update((sorted_ids.len() as u32).to_be_bytes());
    for id in sorted_ids {
        h.update(id.to_be_bytes());
    }
    Token(h.finalize().into())
}
