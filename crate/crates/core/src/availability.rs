//! Channel acceptance models simulating locked liquidity and failures.
//!
//! Every channel gets one uniform draw per discovery episode. Draws are a
//! pure function of `(model seed, episode, channel id)` and are cached for
//! the lifetime of an [`Episode`], so candidate routes sharing a channel see
//! the same liquidity state.

use std::collections::{BTreeSet, HashMap};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Channel, ChannelId, Msat, Network, Route};

/// Draws are 53-bit integers interpreted as `bits / 2^53`.
pub const DRAW_BITS: u32 = 53;
const DRAW_SCALE: u128 = 1 << DRAW_BITS;
/// Fixed-point scale of liquidity factors.
pub const FACTOR_SCALE: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum AvailabilityError {
    #[error("acceptance probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("liquidity factor {0} must be finite and non-negative")]
    Factor(f64),
}

/// A uniform draw in `[0, 1)` quantized to 2^-53.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Draw(u64);

impl Draw {
    pub fn from_bits(bits: u64) -> Self {
        Draw(bits & ((1 << DRAW_BITS) - 1))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / DRAW_SCALE as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AvailabilityKind {
    AlwaysAvailable,
    /// Each channel accepts independently with this probability.
    Bernoulli(f64),
    /// Locked liquidity is `v · amount · factor` with `v ~ U[0,1)`; the factor
    /// is stored in millionths.
    UniformLiquidity {
        factor_millionths: u64,
    },
    /// Candidate routes whose presentation index (0-based, per episode) is in
    /// the set are unavailable; everything else is available.
    BlockedSchedule(BTreeSet<usize>),
}

impl AvailabilityKind {
    pub fn bernoulli(p: f64) -> Result<Self, AvailabilityError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(AvailabilityError::Probability(p));
        }
        Ok(AvailabilityKind::Bernoulli(p))
    }

    pub fn uniform_liquidity(factor: f64) -> Result<Self, AvailabilityError> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(AvailabilityError::Factor(factor));
        }
        Ok(AvailabilityKind::UniformLiquidity { factor_millionths: (factor * FACTOR_SCALE as f64).round() as u64 })
    }

    /// Blocks the first `count` presented candidates.
    pub fn blocked_first(count: usize) -> Self {
        AvailabilityKind::BlockedSchedule((0..count).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityModel {
    pub kind: AvailabilityKind,
    pub seed: u64,
}

impl AvailabilityModel {
    pub fn new(kind: AvailabilityKind, seed: u64) -> Self {
        AvailabilityModel { kind, seed }
    }

    pub fn always() -> Self {
        AvailabilityModel { kind: AvailabilityKind::AlwaysAvailable, seed: 0 }
    }

    /// Opens the liquidity state of one discovery episode.
    pub fn episode(&self, episode: u64) -> Episode<'_> {
        Episode { model: self, episode, draws: HashMap::new(), presented: 0 }
    }

    /// The draw of `channel` in `episode`, independent of any cache.
    pub fn draw(&self, episode: u64, channel: ChannelId) -> Draw {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&episode.to_le_bytes());
        key[16..24].copy_from_slice(b"avail-v1");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(channel.0);
        Draw::from_bits(rng.next_u64())
    }
}

/// Locked liquidity `floor(v · amount · factor)` in msat, exact.
pub fn locked_liquidity(draw: Draw, amount: Msat, factor_millionths: u64) -> u128 {
    let t1 = draw.bits() as u128 * amount as u128;
    let (q1, r1) = (t1 >> DRAW_BITS, t1 & (DRAW_SCALE - 1));
    let f = factor_millionths as u128;
    let scaled = q1 * f + ((r1 * f) >> DRAW_BITS);
    scaled / FACTOR_SCALE as u128
}

/// Whether a single channel accepts `amount` under `kind` for a given draw.
/// `BlockedSchedule` is decided per route, so every channel accepts here.
pub fn channel_accepts(channel: &Channel, amount: Msat, kind: &AvailabilityKind, draw: Draw) -> bool {
    match kind {
        AvailabilityKind::AlwaysAvailable | AvailabilityKind::BlockedSchedule(_) => true,
        AvailabilityKind::Bernoulli(p) => draw.as_f64() < *p,
        AvailabilityKind::UniformLiquidity { factor_millionths } => {
            let locked = locked_liquidity(draw, amount, *factor_millionths);
            channel.capacity as u128 >= amount as u128 + locked
        }
    }
}

/// Per-episode liquidity state.
#[derive(Debug)]
pub struct Episode<'m> {
    model: &'m AvailabilityModel,
    episode: u64,
    draws: HashMap<ChannelId, Draw>,
    presented: usize,
}

impl Episode<'_> {
    pub fn draw(&mut self, channel: ChannelId) -> Draw {
        let (model, episode) = (self.model, self.episode);
        *self.draws.entry(channel).or_insert_with(|| model.draw(episode, channel))
    }

    pub fn channel_accepts(&mut self, channel: &Channel, amount: Msat) -> bool {
        match &self.model.kind {
            AvailabilityKind::AlwaysAvailable | AvailabilityKind::BlockedSchedule(_) => true,
            kind => {
                let draw = self.draw(channel.id);
                channel_accepts(channel, amount, kind, draw)
            }
        }
    }

    /// Tests the next presented candidate route. Each call advances the
    /// presentation index used by `BlockedSchedule`.
    pub fn route_available(&mut self, network: &Network, route: &Route, amount: Msat) -> bool {
        let index = self.presented;
        self.presented += 1;
        if let AvailabilityKind::BlockedSchedule(blocked) = &self.model.kind {
            return !blocked.contains(&index);
        }
        route.channels.iter().all(|&id| {
            let channel = network.channel(id).expect("route channel in network");
            self.channel_accepts(channel, amount)
        })
    }

    /// Number of candidate routes tested so far.
    pub fn presented(&self) -> usize {
        self.presented
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;

    fn channel(capacity: Msat) -> Channel {
        Channel { id: ChannelId(1), src: NodeId(0), dst: NodeId(1), base_fee: 0, proportional_rate: 0, capacity }
    }

    #[test]
    fn zero_factor_never_locks() {
        let kind = AvailabilityKind::uniform_liquidity(0.0).unwrap();
        for bits in [0, 1 << 52, (1 << 53) - 1] {
            assert!(channel_accepts(&channel(1_000_000), 1_000_000, &kind, Draw::from_bits(bits)));
        }
    }

    #[test]
    fn bernoulli_edges() {
        let one = AvailabilityKind::bernoulli(1.0).unwrap();
        let zero = AvailabilityKind::bernoulli(0.0).unwrap();
        let top = Draw::from_bits(u64::MAX);
        assert!(channel_accepts(&channel(0), 5, &one, top));
        assert!(!channel_accepts(&channel(u64::MAX), 5, &zero, Draw::from_bits(0)));
        assert!(AvailabilityKind::bernoulli(1.5).is_err());
        assert!(AvailabilityKind::uniform_liquidity(-1.0).is_err());
    }

    #[test]
    fn liquidity_threshold_is_half_at_one_and_a_half_capacity() {
        let kind = AvailabilityKind::uniform_liquidity(1.0).unwrap();
        let c = channel(1_500_000);
        let half = 1u64 << 52;
        // v = 0.5 locks exactly 500_000 msat, which still fits
        assert!(channel_accepts(&c, 1_000_000, &kind, Draw::from_bits(half)));
        assert!(!channel_accepts(&c, 1_000_000, &kind, Draw::from_bits(half + (1 << 34))));
    }

    #[test]
    fn locked_liquidity_matches_rational_value() {
        // v = 3/4, amount 1000, factor 2.5 -> 1875
        let v = Draw::from_bits(3 << 51);
        assert_eq!(locked_liquidity(v, 1000, 2_500_000), 1875);
        assert!(locked_liquidity(Draw::from_bits((1 << 53) - 1), u64::MAX, u64::MAX) > 0);
    }

    #[test]
    fn insufficient_capacity_always_rejects() {
        let kind = AvailabilityKind::uniform_liquidity(0.0).unwrap();
        assert!(!channel_accepts(&channel(999), 1000, &kind, Draw::from_bits(0)));
    }

    #[test]
    fn draws_are_cached_and_deterministic() {
        let model = AvailabilityModel::new(AvailabilityKind::Bernoulli(0.5), 42);
        let mut ep = model.episode(3);
        let a = ep.draw(ChannelId(10));
        assert_eq!(a, ep.draw(ChannelId(10)));
        assert_eq!(a, model.draw(3, ChannelId(10)));
        assert_ne!(model.draw(3, ChannelId(10)), model.draw(4, ChannelId(10)));
    }

    #[test]
    fn blocked_schedule_counts_presentations() {
        let net = crate::graph::Network::with_node_count(2, vec![channel(10)]).unwrap();
        let route = Route::new(&net, NodeId(0), NodeId(1), vec![ChannelId(1)], 1).unwrap();
        let model = AvailabilityModel::new(AvailabilityKind::blocked_first(2), 0);
        let mut ep = model.episode(0);
        assert!(!ep.route_available(&net, &route, 1));
        assert!(!ep.route_available(&net, &route, 1));
        assert!(ep.route_available(&net, &route, 1));
        assert!(ep.route_available(&net, &Route::empty(NodeId(0)), 1));
    }
}
