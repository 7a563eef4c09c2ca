use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{AdvantageModel, GaussianPolicy};
use super::{discriminator_prob, IrlError, Observation, SortingMdp};
use crate::io::write_atomic;
use crate::nn::{adam_step, clip_grad_norm, AdamState, TrainConfig, TrainingMeta};
use crate::world::{Aabb, Demonstration, SceneState};
use crate::Vec3;

/// Iterations the discriminator may stay perfect before the run is flagged.
const COLLAPSE_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirlConfig {
    pub disc_lr: f64,
    pub policy_lr: f64,
    pub iterations: usize,
    pub rollouts_per_iter: usize,
    pub entropy_coef: f64,
    /// Target mean KL(old || new) per policy update.
    pub kl_step_bound: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Discriminator minibatches per iteration.
    pub disc_steps: usize,
    pub disc_batch: usize,
    /// Policy gradient steps per iteration.
    pub policy_steps: usize,
    /// Behavior-cloning warm-up of the policy mean; 0 disables it.
    pub bc_steps: usize,
    pub bc_batch: usize,
    pub bc_lr: f64,
    /// Weight of the behavior-cloning term kept in every policy update.
    pub bc_weight: f64,
}

impl Default for AirlConfig {
    fn default() -> Self {
        AirlConfig {
            disc_lr: 1e-3,
            policy_lr: 1e-3,
            iterations: 100,
            rollouts_per_iter: 16,
            entropy_coef: 1e-3,
            kl_step_bound: 0.01,
            seed: 0,
            hidden: vec![128, 128],
            init_log_std: -4.5,
            disc_steps: 10,
            disc_batch: 64,
            policy_steps: 10,
            bc_steps: 10000,
            bc_batch: 64,
            bc_lr: 1e-3,
            bc_weight: 3.0,
        }
    }
}

impl AirlConfig {
    pub fn validate(&self) -> Result<(), IrlError> {
        let bad = |m: &str| Err(IrlError::InvalidConfig(m.to_string()));
        for (name, lr) in [("disc_lr", self.disc_lr), ("policy_lr", self.policy_lr), ("bc_lr", self.bc_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.kl_step_bound > 0.0) {
            return bad("kl_step_bound must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.bc_weight >= 0.0) {
            return bad("entropy_coef and bc_weight must be non-negative");
        }
        if self.rollouts_per_iter == 0 || self.disc_batch == 0 || self.bc_batch == 0 || self.hidden.is_empty() {
            return bad("rollouts_per_iter, batch sizes and hidden layers must be non-empty");
        }
        Ok(())
    }
}

/// A demonstrated (state, action) pair, state already encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPair {
    pub obs: Vec<f64>,
    pub action: Vec3,
}

/// Every non-terminal frame of every demonstration as a (state, action)
/// pair. The terminal frame carries no decision and is left out.
pub fn expert_pairs(demos: &[Demonstration], workspace: &Aabb) -> Vec<ExpertPair> {
    demos
        .iter()
        .flat_map(|d| {
            d.frames[..d.frames.len().saturating_sub(1)].iter().map(|f| ExpertPair {
                obs: Observation::from_frame(f).encode(workspace),
                action: f.action,
            })
        })
        .collect()
}

/// One sampled episode; `states` has one more entry than `actions`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<SceneState>,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec3>,
    pub log_probs: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn eef_path(&self) -> Vec<Vec3> {
        self.states.iter().map(|s| s.eef).collect()
    }

    pub fn sorted(&self) -> bool {
        self.states.last().is_some_and(SceneState::all_sorted)
    }
}

/// Samples `n` episodes of at most `horizon` steps; episode `i` draws from
/// stream `i` of a generator seeded with `seed`.
pub fn rollout(policy: &GaussianPolicy, mdp: &SortingMdp, horizon: usize, n: usize, seed: u64) -> Result<Vec<Trajectory>, IrlError> {
    if horizon == 0 {
        return Err(IrlError::InvalidConfig("horizon must be at least 1".into()));
    }
    let ws = mdp.workspace();
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut s = mdp.reset(&mut rng)?;
            let mut tr = Trajectory {
                states: vec![s.clone()],
                obs: Vec::new(),
                actions: Vec::new(),
                log_probs: Vec::new(),
            };
            while tr.len() < horizon && !s.all_sorted() {
                let obs = mdp.observe(&s).encode(ws);
                let (a, lp) = policy.sample(&obs, &mut rng)?;
                s = mdp.step(&s, a)?;
                tr.obs.push(obs);
                tr.actions.push(a);
                tr.log_probs.push(lp);
                tr.states.push(s.clone());
            }
            Ok(tr)
        })
        .collect()
}

/// `sum_t gamma^t (R(s_t, a_t) + entropy_coef * H(pi))`.
pub fn entropy_regularized_return<F>(traj: &Trajectory, mut reward: F, gamma: f64, policy: &GaussianPolicy, entropy_coef: f64) -> Result<f64, IrlError>
where
    F: FnMut(&[f64], &Vec3) -> Result<f64, IrlError>,
{
    if traj.is_empty() {
        return Err(IrlError::InsufficientData("empty trajectory".into()));
    }
    let h = entropy_coef * policy.entropy();
    let mut total = 0.0;
    let mut w = 1.0;
    for (o, a) in traj.obs.iter().zip(&traj.actions) {
        total += w * (reward(o, a)? + h);
        w *= gamma;
    }
    Ok(total)
}

/// Percentage of pairs whose policy mean action lies within `tolerance`
/// (Euclidean, metres) of the demonstrated action.
pub fn evaluate_lba(policy: &GaussianPolicy, pairs: &[ExpertPair], tolerance: f64) -> Result<f64, IrlError> {
    if pairs.is_empty() {
        return Err(IrlError::InsufficientData("no expert pairs".into()));
    }
    if !(tolerance > 0.0) {
        return Err(IrlError::InvalidConfig("tolerance must be positive".into()));
    }
    let mut hits = 0usize;
    for p in pairs {
        if (policy.mean_action(&p.obs)? - p.action).norm() < tolerance {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / pairs.len() as f64)
}

/// Squared error of the policy mean against demonstrated actions, in units
/// of the step limit, with its gradient over the network parameters.
fn bc_objective(policy: &GaussianPolicy, pairs: &[&ExpertPair]) -> Result<(f64, Vec<f64>), IrlError> {
    let obs: Vec<Vec<f64>> = pairs.iter().map(|p| p.obs.clone()).collect();
    let pass = policy.mean_pass(&obs)?;
    let n = pairs.len() as f64;
    let m2 = policy.max_step * policy.max_step;
    let mut loss = 0.0;
    let grads: Vec<Vec3> = pass
        .means
        .iter()
        .zip(pairs)
        .map(|(m, p)| {
            let d = m - p.action;
            loss += d.norm_squared() / m2 / n;
            d * (2.0 / m2 / n)
        })
        .collect();
    let out = policy.mean_to_output_grads(&pass, &grads);
    Ok((loss, policy.net.backward(&pass.cache, &out)?.params))
}

/// Fits the policy mean to the demonstrated actions (squared error in
/// units of the step limit). Returns the loss of the last minibatch.
pub fn behavior_clone(policy: &mut GaussianPolicy, pairs: &[ExpertPair], steps: usize, batch: usize, lr: f64, seed: u64) -> Result<f64, IrlError> {
    if pairs.is_empty() {
        return Err(IrlError::InsufficientData("no expert pairs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = AdamState::new(policy.net.param_count());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut cursor = order.len();
    let mut last = f64::NAN;
    for step in 0..steps {
        let mut idx = Vec::with_capacity(batch);
        while idx.len() < batch.min(pairs.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            idx.push(order[cursor]);
            cursor += 1;
        }
        let batch: Vec<&ExpertPair> = idx.iter().map(|&i| &pairs[i]).collect();
        let (loss, mut g) = bc_objective(policy, &batch)?;
        if !loss.is_finite() {
            return Err(IrlError::NonFinite(step));
        }
        clip_grad_norm(&mut g, 1.0);
        adam_step(policy.net.params_mut(), &g, &mut adam, lr)?;
        last = loss;
    }
    Ok(last)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub disc_accuracy: f64,
    pub mean_return: f64,
    pub mean_kl: f64,
}

#[derive(Debug, Clone)]
pub struct AirlOutcome {
    pub policy: GaussianPolicy,
    pub reward: AdvantageModel,
    pub history: Vec<HistoryRow>,
    pub bc_loss: Option<f64>,
    /// The discriminator stayed perfect for the collapse window.
    pub collapse_warning: bool,
}

impl AirlOutcome {
    pub fn policy_meta(&self, cfg: &AirlConfig) -> TrainingMeta {
        meta(cfg.policy_lr, cfg, self.history.len() as u64, self.history.last().map_or(0.0, |h| h.mean_return))
    }

    pub fn reward_meta(&self, cfg: &AirlConfig) -> TrainingMeta {
        meta(cfg.disc_lr, cfg, self.history.len() as u64, self.history.last().map_or(0.0, |h| h.disc_accuracy))
    }
}

fn meta(lr: f64, cfg: &AirlConfig, steps: u64, final_loss: f64) -> TrainingMeta {
    TrainingMeta {
        steps,
        final_loss,
        config: TrainConfig {
            learning_rate: lr,
            decay_factor: 1.0,
            batch_size: cfg.disc_batch,
            max_steps: cfg.iterations.max(1) as u64,
            seed: cfg.seed,
            ..TrainConfig::default()
        },
    }
}

/// Samples and frozen pre-update quantities for one policy update.
struct SurrogateBatch<'a> {
    obs: &'a [Vec<f64>],
    actions: &'a [Vec3],
    old_log_probs: &'a [f64],
    old_means: &'a [Vec3],
    old_log_std: [f64; 3],
    advantages: &'a [f64],
}

/// Penalized surrogate `mean(-ratio * A + beta * KL(old || new)) - c * H`
/// and its gradient over the network parameters followed by the log-stds.
fn surrogate(policy: &GaussianPolicy, b: &SurrogateBatch, beta: f64, entropy_coef: f64) -> Result<(f64, Vec<f64>), IrlError> {
    let pass = policy.mean_pass(b.obs)?;
    let ls = policy.log_std;
    let n = b.obs.len() as f64;
    let mut loss = -entropy_coef * policy.entropy();
    let mut gmeans = Vec::with_capacity(b.obs.len());
    let mut gls = [-entropy_coef; 3];
    for i in 0..b.obs.len() {
        let mu = pass.means[i];
        let a = b.actions[i];
        let ratio = (policy.log_prob_with_mean(&mu, &a) - b.old_log_probs[i]).exp();
        let (kl, kgm, kgs) = gaussian_kl(&b.old_means[i], &b.old_log_std, &mu, &ls);
        loss += (-b.advantages[i] * ratio + beta * kl) / n;
        let mut gm = Vec3::zeros();
        for d in 0..3 {
            let var = (2.0 * ls[d]).exp();
            let u = a[d] - mu[d];
            gm[d] = (-b.advantages[i] * ratio * u / var + beta * kgm[d]) / n;
            gls[d] += (-b.advantages[i] * ratio * (u * u / var - 1.0) + beta * kgs[d]) / n;
        }
        gmeans.push(gm);
    }
    let out = policy.mean_to_output_grads(&pass, &gmeans);
    let mut g = policy.net.backward(&pass.cache, &out)?.params;
    g.extend_from_slice(&gls);
    Ok((loss, g))
}

/// KL(old || new) between diagonal Gaussians, with gradients of the KL with
/// respect to the new mean and new log-std.
fn gaussian_kl(mo: &Vec3, lso: &[f64; 3], mn: &Vec3, lsn: &[f64; 3]) -> (f64, Vec3, [f64; 3]) {
    let mut kl = 0.0;
    let mut gm = Vec3::zeros();
    let mut gs = [0.0; 3];
    for k in 0..3 {
        let vo = (2.0 * lso[k]).exp();
        let vn = (2.0 * lsn[k]).exp();
        let d = mn[k] - mo[k];
        kl += lsn[k] - lso[k] + (vo + d * d) / (2.0 * vn) - 0.5;
        gm[k] = d / vn;
        gs[k] = 1.0 - (vo + d * d) / vn;
    }
    (kl, gm, gs)
}

/// Adversarial IRL: alternate a binary cross-entropy update of the
/// discriminator `sigma(f - log pi)` on expert versus policy pairs with a
/// KL-penalized policy-gradient step on the reward `f - log pi`.
pub fn train_airl(demos: &[Demonstration], mdp: &SortingMdp, cfg: &AirlConfig) -> Result<AirlOutcome, IrlError> {
    cfg.validate()?;
    mdp.validate()?;
    if demos.len() < 5 {
        return Err(IrlError::InsufficientData(format!("{} demonstrations, need at least 5", demos.len())));
    }
    let ws = mdp.workspace();
    let expert = expert_pairs(demos, ws);
    let max_step = mdp.max_step();
    if let Some(p) = expert.iter().find(|p| p.action.amax() > max_step + 1e-9) {
        return Err(IrlError::OversizedAction {
            action: [p.action.x, p.action.y, p.action.z],
            max_step,
        });
    }
    let horizon = demos.iter().map(Demonstration::len).max().unwrap_or(1).max(mdp.horizon);

    let mut policy = GaussianPolicy::new(&cfg.hidden, cfg.init_log_std, max_step, cfg.seed)?;
    let mut f = AdvantageModel::new(&cfg.hidden, max_step, cfg.seed.wrapping_add(1))?;
    let bc_loss = if cfg.bc_steps > 0 {
        let l = behavior_clone(&mut policy, &expert, cfg.bc_steps, cfg.bc_batch, cfg.bc_lr, cfg.seed)?;
        log::info!("behavior cloning: final loss {l:.5}");
        Some(l)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA1);
    let mut disc_adam = AdamState::new(f.net.param_count());
    let mut pol_adam = AdamState::new(policy.net.param_count() + 3);
    let mut beta = 1.0;
    let mut perfect_run = 0;
    let mut collapse_warning = false;
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let trajs = rollout(&policy, mdp, horizon, cfg.rollouts_per_iter, cfg.seed.wrapping_add(1000 + it as u64))?;
        let gen: Vec<ExpertPair> = trajs
            .iter()
            .flat_map(|t| t.obs.iter().zip(&t.actions).map(|(o, a)| ExpertPair { obs: o.clone(), action: *a }))
            .collect();
        let gen_lp: Vec<f64> = trajs.iter().flat_map(|t| t.log_probs.iter().copied()).collect();
        if gen.is_empty() {
            return Err(IrlError::InsufficientData("rollouts produced no steps".into()));
        }
        let exp_lp: Vec<f64> = expert.iter().map(|p| policy.log_prob(&p.obs, &p.action)).collect::<Result<_, _>>()?;

        // Discriminator: balanced minibatches, gradient of the BCE wrt f is D - y.
        let half = (cfg.disc_batch / 2).max(1);
        for _ in 0..cfg.disc_steps {
            let mut xs = Vec::with_capacity(2 * half);
            let mut lps = Vec::with_capacity(2 * half);
            let mut ys = Vec::with_capacity(2 * half);
            for _ in 0..half {
                let i = rand::Rng::gen_range(&mut rng, 0..expert.len());
                xs.push(f.input(&expert[i].obs, &expert[i].action));
                lps.push(exp_lp[i]);
                ys.push(1.0);
                let j = rand::Rng::gen_range(&mut rng, 0..gen.len());
                xs.push(f.input(&gen[j].obs, &gen[j].action));
                lps.push(gen_lp[j]);
                ys.push(0.0);
            }
            let (out, cache) = f.net.forward_sequence(&xs)?;
            let n = xs.len() as f64;
            let grads: Vec<Vec<f64>> = out
                .iter()
                .zip(&lps)
                .zip(&ys)
                .map(|((o, lp), y)| vec![(discriminator_prob(o[0], *lp) - y) / n])
                .collect();
            let mut g = f.net.backward(&cache, &grads)?.params;
            clip_grad_norm(&mut g, 1.0);
            adam_step(f.net.params_mut(), &g, &mut disc_adam, cfg.disc_lr)?;
        }

        let accuracy = {
            let mut hit_e = 0usize;
            for (p, lp) in expert.iter().zip(&exp_lp) {
                hit_e += (discriminator_prob(f.value(&p.obs, &p.action)?, *lp) > 0.5) as usize;
            }
            let mut hit_g = 0usize;
            for (p, lp) in gen.iter().zip(&gen_lp) {
                hit_g += (discriminator_prob(f.value(&p.obs, &p.action)?, *lp) < 0.5) as usize;
            }
            0.5 * (hit_e as f64 / expert.len() as f64 + hit_g as f64 / gen.len() as f64)
        };
        if accuracy >= 1.0 {
            perfect_run += 1;
            if perfect_run == COLLAPSE_WINDOW {
                log::warn!("discriminator accuracy pinned at 1.0 for {COLLAPSE_WINDOW} iterations; the policy may have collapsed");
                collapse_warning = true;
            }
        } else {
            perfect_run = 0;
        }

        // Returns under the recovered reward f - log pi (history), and
        // advantages from returns-to-go of f alone: in expectation the
        // -log pi part only contributes the entropy gradient, which is added
        // analytically below. Baseline: mean return-to-go at each time index.
        let h = cfg.entropy_coef * policy.entropy();
        let mut returns = Vec::with_capacity(trajs.len());
        let mut to_go: Vec<Vec<f64>> = Vec::with_capacity(trajs.len());
        for t in &trajs {
            let fv: Vec<f64> = (0..t.len()).map(|i| f.value(&t.obs[i], &t.actions[i])).collect::<Result<_, _>>()?;
            let mut ret = 0.0;
            let mut w = 1.0;
            for (fi, lp) in fv.iter().zip(&t.log_probs) {
                ret += w * (fi - lp + h);
                w *= mdp.gamma;
            }
            returns.push(ret);
            let mut g = vec![0.0; fv.len()];
            let mut acc = 0.0;
            for i in (0..fv.len()).rev() {
                acc = fv[i] + mdp.gamma * acc;
                g[i] = acc;
            }
            to_go.push(g);
        }
        let longest = to_go.iter().map(Vec::len).max().unwrap_or(0);
        let baseline: Vec<f64> = (0..longest)
            .map(|i| {
                let v: Vec<f64> = to_go.iter().filter_map(|g| g.get(i).copied()).collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        let mut adv: Vec<f64> = to_go.iter().flat_map(|g| g.iter().enumerate().map(|(i, v)| v - baseline[i])).collect();
        let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
        let asd = (adv.iter().map(|a| a * a).sum::<f64>() / adv.len() as f64).sqrt();
        adv.iter_mut().for_each(|a| *a /= asd + 1e-8);

        // KL-penalized surrogate on the policy mean network and log-std.
        let old_means = policy.mean_pass(&gen.iter().map(|p| p.obs.clone()).collect::<Vec<_>>())?.means;
        let old_ls = policy.log_std;
        let obs: Vec<Vec<f64>> = gen.iter().map(|p| p.obs.clone()).collect();
        let n = gen.len() as f64;
        let batch = SurrogateBatch {
            obs: &obs,
            actions: &gen.iter().map(|p| p.action).collect::<Vec<_>>(),
            old_log_probs: &gen_lp,
            old_means: &old_means,
            old_log_std: old_ls,
            advantages: &adv,
        };
        let mut mean_kl = 0.0;
        for _ in 0..cfg.policy_steps {
            let (_, mut g) = surrogate(&policy, &batch, beta, cfg.entropy_coef)?;
            if cfg.bc_weight > 0.0 {
                let sample: Vec<&ExpertPair> = (0..cfg.bc_batch).map(|_| &expert[rand::Rng::gen_range(&mut rng, 0..expert.len())]).collect();
                let (_, gb) = bc_objective(&policy, &sample)?;
                g.iter_mut().zip(&gb).for_each(|(a, b)| *a += cfg.bc_weight * b);
            }
            clip_grad_norm(&mut g, 1.0);
            let mut params = policy.net.params().to_vec();
            params.extend_from_slice(&policy.log_std);
            adam_step(&mut params, &g, &mut pol_adam, cfg.policy_lr)?;
            let np = policy.net.param_count();
            policy.set_log_std([params[np], params[np + 1], params[np + 2]]);
            params.truncate(np);
            policy.net.params_mut().copy_from_slice(&params);
        }
        let new_means = policy.mean_pass(&obs)?.means;
        for (mo, mn) in old_means.iter().zip(&new_means) {
            mean_kl += gaussian_kl(mo, &old_ls, mn, &policy.log_std).0 / n;
        }
        if mean_kl > 1.5 * cfg.kl_step_bound {
            beta *= 2.0;
        } else if mean_kl < cfg.kl_step_bound / 1.5 {
            beta = (beta / 2.0).max(1e-4);
        }
        if !(accuracy.is_finite() && mean_return.is_finite() && mean_kl.is_finite()) {
            return Err(IrlError::NonFinite(it));
        }
        log::debug!("airl {it}: disc acc {accuracy:.3}, return {mean_return:.3}, kl {mean_kl:.5}, beta {beta:.3}");
        history.push(HistoryRow {
            iteration: it,
            disc_accuracy: accuracy,
            mean_return,
            mean_kl,
        });
    }

    Ok(AirlOutcome {
        policy,
        reward: f,
        history,
        bc_loss,
        collapse_warning,
    })
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<(), IrlError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irl::LOG_STD_MIN;
    use std::f64::consts::{E, PI};

    fn zero_entropy_policy() -> GaussianPolicy {
        let mut p = GaussianPolicy::new(&[8], 0.0, 0.05, 0).unwrap();
        p.set_log_std([-0.5 * (2.0 * PI * E).ln(); 3]);
        p
    }

    fn traj(n: usize) -> Trajectory {
        let mdp = SortingMdp::default();
        let p = zero_entropy_policy();
        rollout(&p, &mdp, n, 1, 0).unwrap().remove(0)
    }

    #[test]
    fn geometric_return() {
        let p = zero_entropy_policy();
        let t = traj(3);
        assert_eq!(t.len(), 3);
        let r = entropy_regularized_return(&t, |_, _| Ok(1.0), 0.5, &p, 1.0).unwrap();
        assert!((r - 1.75).abs() < 1e-12);
        let z = entropy_regularized_return(&t, |_, _| Ok(0.0), 0.5, &p, 1.0).unwrap();
        assert!(z.abs() < 1e-12);
    }

    #[test]
    fn return_matches_brute_force() {
        let mut p = zero_entropy_policy();
        p.set_log_std([-2.0, -1.0, -3.5]);
        let t = traj(12);
        let rew = |o: &[f64], a: &Vec3| o[0] * 0.3 - a.norm();
        let (gamma, c): (f64, f64) = (0.93, 0.2);
        let h: f64 = p.log_std.iter().map(|s| s + 0.5 * (1.0 + (2.0 * PI).ln())).sum();
        let mut expect = 0.0;
        for i in 0..t.len() {
            expect += gamma.powi(i as i32) * (rew(&t.obs[i], &t.actions[i]) + c * h);
        }
        let got = entropy_regularized_return(&t, |o, a| Ok(rew(o, a)), gamma, &p, c).unwrap();
        assert!((got - expect).abs() < 1e-12);
        let plain: f64 = (0..t.len()).map(|i| gamma.powi(i as i32) * rew(&t.obs[i], &t.actions[i])).sum();
        let zero = entropy_regularized_return(&t, |o, a| Ok(rew(o, a)), gamma, &p, 0.0).unwrap();
        assert!((zero - plain).abs() < 1e-12);
    }

    #[test]
    fn rollouts_chain_and_store_log_probs() {
        let mdp = SortingMdp::default();
        let mut p = GaussianPolicy::new(&[16], -2.0, 0.05, 4).unwrap();
        p.set_log_std([-2.0; 3]);
        let trs = rollout(&p, &mdp, 20, 3, 9).unwrap();
        for t in &trs {
            assert_eq!(t.states.len(), t.len() + 1);
            for i in 0..t.len() {
                assert_eq!(mdp.step(&t.states[i], t.actions[i]).unwrap(), t.states[i + 1]);
                assert_eq!(t.obs[i], mdp.observe(&t.states[i]).encode(mdp.workspace()));
                assert!((p.log_prob(&t.obs[i], &t.actions[i]).unwrap() - t.log_probs[i]).abs() < 1e-10);
            }
        }
        assert_eq!(trs, rollout(&p, &mdp, 20, 3, 9).unwrap());
    }

    #[test]
    fn near_deterministic_rollouts_agree_in_action() {
        let mdp = SortingMdp::default();
        let mut p = GaussianPolicy::new(&[16], 0.0, 0.05, 4).unwrap();
        p.set_log_std([LOG_STD_MIN; 3]);
        let trs = rollout(&p, &mdp, 5, 4, 1).unwrap();
        for t in &trs {
            for (o, a) in t.obs.iter().zip(&t.actions) {
                assert!((p.mean_action(o).unwrap() - a).norm() < 0.05);
            }
        }
    }

    #[test]
    fn lba_examples() {
        let p = GaussianPolicy::new(&[8], -3.0, 0.05, 0).unwrap();
        let obs = vec![0.2; crate::irl::OBS_DIM];
        let mean = p.mean_action(&obs).unwrap();
        let exact = vec![ExpertPair { obs: obs.clone(), action: mean }];
        assert_eq!(evaluate_lba(&p, &exact, 0.02).unwrap(), 100.0);
        let mut mixed = exact.clone();
        mixed.push(ExpertPair {
            obs: obs.clone(),
            action: mean + Vec3::new(0.05, 0.0, 0.0),
        });
        let once = evaluate_lba(&p, &mixed, 0.02).unwrap();
        assert_eq!(once, 50.0);
        let twice: Vec<ExpertPair> = mixed.iter().chain(&mixed).cloned().collect();
        assert_eq!(evaluate_lba(&p, &twice, 0.02).unwrap(), once);
        assert!(evaluate_lba(&p, &[], 0.02).is_err());
        assert!(evaluate_lba(&p, &exact, 0.0).is_err());
    }

    #[test]
    fn surrogate_gradient_matches_finite_difference() {
        let mdp = SortingMdp::default();
        let mut p = GaussianPolicy::new(&[6, 5], -3.0, 0.05, 2).unwrap();
        let trs = rollout(&p, &mdp, 6, 2, 3).unwrap();
        let obs: Vec<Vec<f64>> = trs.iter().flat_map(|t| t.obs.clone()).collect();
        let actions: Vec<Vec3> = trs.iter().flat_map(|t| t.actions.clone()).collect();
        let lps: Vec<f64> = trs.iter().flat_map(|t| t.log_probs.clone()).collect();
        let old_means = p.mean_pass(&obs).unwrap().means;
        let adv: Vec<f64> = (0..obs.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let batch = SurrogateBatch {
            obs: &obs,
            actions: &actions,
            old_log_probs: &lps,
            old_means: &old_means,
            old_log_std: p.log_std,
            advantages: &adv,
        };
        // Move away from the old policy so the KL term is active.
        for v in p.net.params_mut().iter_mut() {
            *v *= 1.1;
        }
        p.set_log_std([-2.9, -3.1, -3.05]);
        let (_, g) = surrogate(&p, &batch, 0.7, 0.01).unwrap();
        let np = p.net.param_count();
        let h = 1e-6;
        for k in (0..np).step_by(7).chain(np..np + 3) {
            let mut q = p.clone();
            let mut r = p.clone();
            if k < np {
                q.net.params_mut()[k] += h;
                r.net.params_mut()[k] -= h;
            } else {
                let mut a = p.log_std;
                a[k - np] += h;
                q.log_std = a;
                a[k - np] -= 2.0 * h;
                r.log_std = a;
            }
            let fd = (surrogate(&q, &batch, 0.7, 0.01).unwrap().0 - surrogate(&r, &batch, 0.7, 0.01).unwrap().0) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(g[k].abs()).max(1e-3), "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn kl_gradient_matches_finite_difference() {
        let mo = Vec3::new(0.01, -0.02, 0.03);
        let lso = [-3.0, -2.5, -2.0];
        let mn = Vec3::new(0.015, -0.01, 0.02);
        let lsn = [-2.8, -2.7, -2.1];
        let (kl, gm, gs) = gaussian_kl(&mo, &lso, &mn, &lsn);
        assert!(kl > 0.0);
        let h = 1e-7;
        for k in 0..3 {
            let mut m2 = mn;
            m2[k] += h;
            assert!(((gaussian_kl(&mo, &lso, &m2, &lsn).0 - kl) / h - gm[k]).abs() < 1e-3 * gm[k].abs().max(1.0));
            let mut l2 = lsn;
            l2[k] += h;
            assert!(((gaussian_kl(&mo, &lso, &mn, &l2).0 - kl) / h - gs[k]).abs() < 1e-4);
        }
        assert!(gaussian_kl(&mo, &lso, &mo, &lso).0.abs() < 1e-15);
    }
}
