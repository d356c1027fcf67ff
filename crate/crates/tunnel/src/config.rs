//! Defense selection and parameters, plus the line-oriented `key = value`
//! config file shared by client and bridge.

use std::fmt::Write as _;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use thiserror::Error;

use wfpad::defense::{FrontConfig, FrontMachine, RandomWtConfig, RandomWtMachine, TamarawConfig, TamarawMachine};
use wfpad::kernel::{
    DefenseMachine, DefenseState, KernelAction, KernelConfig, KernelError, KernelEvent, Side,
};

use crate::handshake::hash_params;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefenseId {
    None,
    Tamaraw,
    Front,
    RandomWt,
}

impl DefenseId {
    pub fn wire_id(self) -> u8 {
        match self {
            DefenseId::None => 0,
            DefenseId::Tamaraw => 1,
            DefenseId::Front => 2,
            DefenseId::RandomWt => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DefenseId::None => "none",
            DefenseId::Tamaraw => "tamaraw",
            DefenseId::Front => "front",
            DefenseId::RandomWt => "randomwt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(DefenseId::None),
            "tamaraw" => Some(DefenseId::Tamaraw),
            "front" => Some(DefenseId::Front),
            "randomwt" => Some(DefenseId::RandomWt),
            _ => None,
        }
    }
}

/// The full parameter block negotiated between client and bridge. The
/// parameter hash covers all of it, so both sides run from identical
/// settings or not at all.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseSettings {
    pub defense: DefenseId,
    pub kernel: KernelConfig<f64>,
    pub tamaraw: TamarawConfig<f64>,
    pub front: FrontConfig<f64>,
    pub randomwt: RandomWtConfig<f64>,
}

impl DefenseSettings {
    pub fn defaults(defense: DefenseId) -> Self {
        DefenseSettings {
            defense,
            kernel: KernelConfig::default(),
            tamaraw: TamarawConfig::default(),
            front: FrontConfig::default(),
            randomwt: RandomWtConfig::default(),
        }
    }

    /// Canonical text encoding, the input of the parameter hash.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut s = String::new();
        let _ = write!(
            s,
            "defense={};kernel={},{},{},{};tamaraw={},{},{};front={},{},{},{};randomwt={},{},{},{},{},{}",
            self.defense.as_str(),
            self.kernel.window,
            self.kernel.start_threshold,
            self.kernel.stop_threshold,
            self.kernel.tick_interval,
            self.tamaraw.rho_out,
            self.tamaraw.rho_in,
            self.tamaraw.length_multiple,
            self.front.n_out,
            self.front.n_in,
            self.front.w_min,
            self.front.w_max,
            self.randomwt.n_real_out,
            self.randomwt.n_real_in,
            self.randomwt.n_fake_out,
            self.randomwt.n_fake_in,
            self.randomwt.p_fake,
            self.randomwt.t_talkie,
        );
        s.into_bytes()
    }

    pub fn param_hash(&self) -> [u8; 32] {
        hash_params(&self.canonical_bytes())
    }

    /// Instantiates the configured defense for one side of the tunnel.
    pub fn build_machine(&self, side: Side, seed: u64) -> Box<dyn DefenseMachine<f64>> {
        match self.defense {
            DefenseId::None => Box::new(Passthrough { side }),
            DefenseId::Tamaraw => Box::new(TamarawMachine::new(side, self.tamaraw, self.kernel)),
            DefenseId::Front => Box::new(FrontMachine::new(side, self.front, self.kernel, seed)),
            DefenseId::RandomWt => {
                Box::new(RandomWtMachine::new(side, self.randomwt, self.kernel, seed))
            }
        }
    }
}

/// No defense: forward every real packet immediately, never pad.
struct Passthrough {
    side: Side,
}

impl DefenseMachine<f64> for Passthrough {
    fn side(&self) -> Side {
        self.side
    }

    fn state(&self) -> DefenseState {
        DefenseState::Stop
    }

    fn on_event(&mut self, event: KernelEvent<f64>) -> Result<Vec<KernelAction<f64>>, KernelError> {
        Ok(match event {
            KernelEvent::RealPacketQueued { size, .. } => {
                vec![KernelAction::SendReal { bytes: size }]
            }
            _ => Vec::new(),
        })
    }
}

/// Parsed config file: the parameter block plus endpoint-specific fields.
#[derive(Debug, Clone)]
pub struct ProxyConfig {
    pub settings: DefenseSettings,
    pub secret: [u8; 32],
    /// Listen address: the SOCKS port for a client, the wire port for a
    /// bridge.
    pub listen: Option<String>,
    /// The bridge address a client dials.
    pub bridge: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`")]
    BadValue { line: usize, key: String },
    #[error("missing required key `{key}`")]
    Missing { key: &'static str },
}

impl ProxyConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut defense = None;
        let mut secret = None;
        let mut listen = None;
        let mut bridge = None;
        let mut settings = DefenseSettings::defaults(DefenseId::None);

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |key: &str| ConfigError::BadValue {
                line,
                key: key.to_string(),
            };

            match key {
                "defense" => {
                    defense = Some(DefenseId::parse(value).ok_or_else(|| bad(key))?);
                }
                "secret" => {
                    let bytes = BASE64.decode(value).map_err(|_| bad(key))?;
                    let arr: [u8; 32] = bytes.try_into().map_err(|_| bad(key))?;
                    secret = Some(arr);
                }
                "listen" => listen = Some(value.to_string()),
                "bridge" => bridge = Some(value.to_string()),
                _ => apply_setting(&mut settings, key, value, line)?,
            }
        }

        settings.defense = defense.ok_or(ConfigError::Missing { key: "defense" })?;
        validate_settings(&settings)?;
        Ok(ProxyConfig {
            settings,
            secret: secret.ok_or(ConfigError::Missing { key: "secret" })?,
            listen,
            bridge,
        })
    }

    /// A fresh config with defaults for one defense and a random secret.
    pub fn generate(defense: DefenseId) -> Self {
        ProxyConfig {
            settings: DefenseSettings::defaults(defense),
            secret: rand::random(),
            listen: None,
            bridge: None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "defense = {}", self.settings.defense.as_str());
        let _ = writeln!(s, "secret = {}", BASE64.encode(self.secret));
        if let Some(listen) = &self.listen {
            let _ = writeln!(s, "listen = {listen}");
        }
        if let Some(bridge) = &self.bridge {
            let _ = writeln!(s, "bridge = {bridge}");
        }
        let k = &self.settings.kernel;
        let _ = writeln!(s, "kernel.window_s = {}", k.window);
        let _ = writeln!(s, "kernel.start_threshold = {}", k.start_threshold);
        let _ = writeln!(s, "kernel.stop_threshold = {}", k.stop_threshold);
        let _ = writeln!(s, "kernel.tick_ms = {}", k.tick_interval * 1000.0);
        match self.settings.defense {
            DefenseId::None => {}
            DefenseId::Tamaraw => {
                let t = &self.settings.tamaraw;
                let _ = writeln!(s, "tamaraw.rho_out_ms = {}", t.rho_out * 1000.0);
                let _ = writeln!(s, "tamaraw.rho_in_ms = {}", t.rho_in * 1000.0);
                let _ = writeln!(s, "tamaraw.L = {}", t.length_multiple);
            }
            DefenseId::Front => {
                let f = &self.settings.front;
                let _ = writeln!(s, "front.n_out = {}", f.n_out);
                let _ = writeln!(s, "front.n_in = {}", f.n_in);
                let _ = writeln!(s, "front.w_min_s = {}", f.w_min);
                let _ = writeln!(s, "front.w_max_s = {}", f.w_max);
            }
            DefenseId::RandomWt => {
                let r = &self.settings.randomwt;
                let _ = writeln!(s, "randomwt.n_real_out = {}", r.n_real_out);
                let _ = writeln!(s, "randomwt.n_real_in = {}", r.n_real_in);
                let _ = writeln!(s, "randomwt.n_fake_out = {}", r.n_fake_out);
                let _ = writeln!(s, "randomwt.n_fake_in = {}", r.n_fake_in);
                let _ = writeln!(s, "randomwt.p_fake = {}", r.p_fake);
                let _ = writeln!(s, "randomwt.t_talkie_ms = {}", r.t_talkie * 1000.0);
            }
        }
        s
    }
}

/// Applies one `key = value` parameter, using the config-file key names.
/// Also the target of `--set` style overrides.
pub fn apply_setting(
    settings: &mut DefenseSettings,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    match key {
        "kernel.window_s" => settings.kernel.window = parse_num(value, key, line)?,
        "kernel.start_threshold" => settings.kernel.start_threshold = parse_num(value, key, line)?,
        "kernel.stop_threshold" => settings.kernel.stop_threshold = parse_num(value, key, line)?,
        "kernel.tick_ms" => settings.kernel.tick_interval = parse_ms(value, key, line)?,
        "tamaraw.rho_out_ms" => settings.tamaraw.rho_out = parse_ms(value, key, line)?,
        "tamaraw.rho_in_ms" => settings.tamaraw.rho_in = parse_ms(value, key, line)?,
        "tamaraw.L" => settings.tamaraw.length_multiple = parse_num(value, key, line)?,
        "front.n_out" => settings.front.n_out = parse_num(value, key, line)?,
        "front.n_in" => settings.front.n_in = parse_num(value, key, line)?,
        "front.w_min_s" => settings.front.w_min = parse_num(value, key, line)?,
        "front.w_max_s" => settings.front.w_max = parse_num(value, key, line)?,
        "randomwt.n_real_out" => settings.randomwt.n_real_out = parse_num(value, key, line)?,
        "randomwt.n_real_in" => settings.randomwt.n_real_in = parse_num(value, key, line)?,
        "randomwt.n_fake_out" => settings.randomwt.n_fake_out = parse_num(value, key, line)?,
        "randomwt.n_fake_in" => settings.randomwt.n_fake_in = parse_num(value, key, line)?,
        "randomwt.p_fake" => settings.randomwt.p_fake = parse_num(value, key, line)?,
        "randomwt.t_talkie_ms" => settings.randomwt.t_talkie = parse_ms(value, key, line)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
    })
}

fn parse_ms(value: &str, key: &str, line: usize) -> Result<f64, ConfigError> {
    let ms: f64 = parse_num(value, key, line)?;
    Ok(ms / 1000.0)
}

/// Invariant checks over a full parameter block.
pub fn validate_settings(s: &DefenseSettings) -> Result<(), ConfigError> {
    let bad = |key: &str| ConfigError::BadValue {
        line: 0,
        key: key.to_string(),
    };
    if !(s.kernel.window > 0.0) || !(s.kernel.tick_interval > 0.0) {
        return Err(bad("kernel.window_s"));
    }
    if !(s.tamaraw.rho_out > 0.0) || !(s.tamaraw.rho_in > 0.0) || s.tamaraw.length_multiple == 0 {
        return Err(bad("tamaraw.rho_out_ms"));
    }
    if s.front.n_out == 0 || s.front.n_in == 0 {
        return Err(bad("front.n_out"));
    }
    if !(s.front.w_min > 0.0) || s.front.w_min > s.front.w_max {
        return Err(bad("front.w_min_s"));
    }
    if !(0.0..=1.0).contains(&s.randomwt.p_fake) {
        return Err(bad("randomwt.p_fake"));
    }
    if !(s.randomwt.t_talkie > 0.0) {
        return Err(bad("randomwt.t_talkie_ms"));
    }
    Ok(())
}
