//! Controller checkpoint.
//!
//! ```text
//! magic    b"FGDDPG\0\0"   8 bytes
//! version  u32             (= 1)
//! sigma f64, rounds_acted u64, gamma f64
//! 4 nets in order actor, critic, actor_target, critic_target; each:
//!   output u8 (0 linear, 1 tanh), layers u32,
//!   per layer: rows u64, cols u64, weights f64[rows·cols], bias f64[cols]
//! pca: present u8; if 1: k u64, d u64, mean f64[d],
//!      components f64[k·d], variances f64[k]
//! buffer: capacity u64, len u64, per transition:
//!   s_len u64, s f64[..], a_len u64, a f64[..], r f64, s2 f64[s_len]
//! ```
//! Little-endian; reals as raw IEEE-754 bits. Optimizer moments are not
//! stored: a restored controller resumes with fresh Adam state.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::ddpg::{Activation, DdpgAgent, DdpgConfig, MlpNet, ReplayBuffer, StateEncoder, Transition};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, PcaModel};

pub const CONTROLLER_MAGIC: &[u8; 8] = b"FGDDPG\0\0";
pub const CONTROLLER_VERSION: u32 = 1;

fn put_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    for &x in xs {
        w.write_u64::<LE>(x.to_bits())?;
    }
    Ok(())
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| Ok(f64::from_bits(r.read_u64::<LE>()?))).collect()
}

fn get_len(r: &mut impl Read) -> Result<usize> {
    let v = r.read_u64::<LE>()?;
    if v > 1 << 32 {
        return Err(Error::Format(format!("implausible length {v}")));
    }
    Ok(v as usize)
}

fn put_net(w: &mut impl Write, net: &MlpNet) -> Result<()> {
    w.write_u8(match net.output {
        Activation::Linear => 0,
        Activation::Tanh => 1,
    })?;
    w.write_u32::<LE>(net.weights.len() as u32)?;
    for (m, b) in net.weights.iter().zip(&net.biases) {
        w.write_u64::<LE>(m.rows() as u64)?;
        w.write_u64::<LE>(m.cols() as u64)?;
        put_f64s(w, m.data())?;
        put_f64s(w, b.data())?;
    }
    Ok(())
}

fn get_net(r: &mut impl Read) -> Result<MlpNet> {
    let output = match r.read_u8()? {
        0 => Activation::Linear,
        1 => Activation::Tanh,
        b => return Err(Error::Format(format!("unknown activation tag {b}"))),
    };
    let n = r.read_u32::<LE>()? as usize;
    let mut weights = Vec::with_capacity(n);
    let mut biases = Vec::with_capacity(n);
    for _ in 0..n {
        let rows = get_len(r)?;
        let cols = get_len(r)?;
        weights.push(Matrix::from_vec(rows, cols, get_f64s(r, rows * cols)?)?);
        biases.push(Matrix::from_vec(1, cols, get_f64s(r, cols)?)?);
    }
    Ok(MlpNet {
        weights,
        biases,
        output,
    })
}

pub fn write_controller(agent: &DdpgAgent, w: &mut impl Write) -> Result<()> {
    w.write_all(CONTROLLER_MAGIC)?;
    w.write_u32::<LE>(CONTROLLER_VERSION)?;
    w.write_u64::<LE>(agent.sigma().to_bits())?;
    w.write_u64::<LE>(agent.rounds_acted())?;
    w.write_u64::<LE>(agent.gamma.to_bits())?;
    for net in [&agent.actor, &agent.critic, &agent.actor_target, &agent.critic_target] {
        put_net(w, net)?;
    }
    match agent.encoder.model() {
        None => w.write_u8(0)?,
        Some(p) => {
            w.write_u8(1)?;
            w.write_u64::<LE>(p.k() as u64)?;
            w.write_u64::<LE>(p.dim() as u64)?;
            put_f64s(w, &p.mean)?;
            put_f64s(w, p.components.data())?;
            put_f64s(w, &p.variances)?;
        }
    }
    w.write_u64::<LE>(agent.buffer.capacity() as u64)?;
    w.write_u64::<LE>(agent.buffer.len() as u64)?;
    for t in agent.buffer.iter() {
        w.write_u64::<LE>(t.state.len() as u64)?;
        put_f64s(w, &t.state)?;
        w.write_u64::<LE>(t.action.len() as u64)?;
        put_f64s(w, &t.action)?;
        w.write_u64::<LE>(t.reward.to_bits())?;
        put_f64s(w, &t.next_state)?;
    }
    Ok(())
}

/// Restores a controller. `cfg` supplies the hyperparameters; network
/// shapes must agree with it.
pub fn read_controller(r: &mut impl Read, cfg: DdpgConfig) -> Result<DdpgAgent> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CONTROLLER_MAGIC {
        return Err(Error::Format("not a controller checkpoint (bad magic)".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != CONTROLLER_VERSION {
        return Err(Error::Format(format!("unsupported controller checkpoint version {version}")));
    }
    let sigma = f64::from_bits(r.read_u64::<LE>()?);
    let acted = r.read_u64::<LE>()?;
    let gamma = f64::from_bits(r.read_u64::<LE>()?);
    let nets = (0..4).map(|_| get_net(r)).collect::<Result<Vec<_>>>()?;
    let mut agent = DdpgAgent::new(cfg.clone(), nets[0].output_dim(), gamma)?;
    for (slot, net) in [&agent.actor, &agent.critic, &agent.actor_target, &agent.critic_target]
        .iter()
        .zip(&nets)
    {
        if !slot.same_shape(net) {
            return Err(Error::Format(format!(
                "checkpoint net {:?} does not match configured {:?}",
                net.dims(),
                slot.dims()
            )));
        }
    }
    let mut it = nets.into_iter();
    agent.actor = it.next().expect("4 nets");
    agent.critic = it.next().expect("4 nets");
    agent.actor_target = it.next().expect("4 nets");
    agent.critic_target = it.next().expect("4 nets");
    if r.read_u8()? == 1 {
        let k = get_len(r)?;
        let d = get_len(r)?;
        let mean = get_f64s(r, d)?;
        let components = Matrix::from_vec(k, d, get_f64s(r, k * d)?)?;
        let variances = get_f64s(r, k)?;
        agent.encoder = StateEncoder::from_model(
            PcaModel {
                mean,
                components,
                variances,
            },
            cfg.warmup,
        );
    }
    let capacity = get_len(r)?;
    let len = get_len(r)?;
    let mut buffer = ReplayBuffer::new(capacity);
    for _ in 0..len {
        let sl = get_len(r)?;
        let state = get_f64s(r, sl)?;
        let al = get_len(r)?;
        let action = get_f64s(r, al)?;
        let reward = f64::from_bits(r.read_u64::<LE>()?);
        let next_state = get_f64s(r, sl)?;
        buffer.push(Transition {
            state,
            action,
            reward,
            next_state,
        });
    }
    agent.buffer = buffer;
    agent.restore_schedule(sigma, acted);
    Ok(agent)
}
