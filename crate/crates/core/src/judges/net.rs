use interlerp_nn::init::{kaiming_uniform, uniform};
use interlerp_nn::{BatchNorm, Conv2d, Linear, Relu, Reshape, Sequential, Tanh};

use super::{Head, JudgeConfig};
use crate::rng::{domain, fnv1a, substream};

/// Builds the judge network for `[H, W, C]` inputs.
///
/// Each row of the output layer is drawn from a stream keyed by the class (or
/// axis) name rather than its position, so relabelling the classes of a
/// dataset permutes the initial head rows along with them.
pub fn build_judge_net(config: &JudgeConfig, input_shape: [usize; 3], head: &Head) -> Sequential<f32> {
    let [mut h, mut w, mut cin] = input_shape;
    let mut rng = substream(config.seed, &[domain::INIT, 0]);
    let mut net = Sequential::new();
    for &cout in &config.channels {
        for j in 0..config.convs_per_block {
            let stride = if j + 1 == config.convs_per_block { 2 } else { 1 };
            let mut conv = Conv2d::new(cin, cout, 3, stride, 1);
            let fan_in = conv.fan_in();
            kaiming_uniform(conv.weight_mut(), fan_in, &mut rng);
            (h, w) = conv.output_size(h, w);
            net = net.push(conv);
            if config.batch_norm {
                net = net.push(BatchNorm::new(cout));
            }
            net = net.push(Relu::default());
            cin = cout;
        }
    }
    let flat = cin * h * w;
    let mut hidden = Linear::new(flat, config.hidden);
    kaiming_uniform(hidden.weight_mut(), flat, &mut rng);
    net = net.push(Reshape::new(&[flat])).push(hidden);
    // Without this, a few early Adam steps on the wide projection can push
    // every hidden unit negative at once and the network never recovers.
    if config.batch_norm {
        net = net.push(BatchNorm::new(config.hidden));
    }
    net = net.push(Relu::default());

    let (names, bounded) = match head {
        Head::Classes(n) => (n, false),
        Head::Bounded(n) => (n, true),
    };
    let mut out = Linear::new(config.hidden, names.len());
    let bound = 1.0 / (config.hidden as f64).sqrt();
    for (o, name) in names.iter().enumerate() {
        uniform(out.weight_row_mut(o), bound, &mut substream(config.seed, &[domain::HEAD, fnv1a(name.as_bytes())]));
    }
    net = net.push(out);
    if bounded {
        net = net.push(Tanh::default());
    }
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use interlerp_nn::{Layer, Tensor};

    #[test]
    fn output_width_and_bounds() {
        let cfg = JudgeConfig { channels: vec![4, 8], hidden: 16, ..JudgeConfig::new(0.5) };
        let x = Tensor::from_vec(&[3, 1, 12, 12], (0..432).map(|i| (i as f32 * 0.37).sin()).collect());
        let cls = build_judge_net(&cfg, [12, 12, 1], &Head::Classes(vec!["a".into(), "b".into(), "c".into()]));
        assert_eq!(cls.infer(&x).shape(), &[3, 3]);
        let reg = build_judge_net(&cfg, [12, 12, 1], &Head::Bounded(vec!["valence".into(), "arousal".into()]));
        let y = reg.infer(&x);
        assert_eq!(y.shape(), &[3, 2]);
        assert!(y.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn head_rows_follow_names() {
        let cfg = JudgeConfig { channels: vec![2], hidden: 4, ..JudgeConfig::new(0.5) };
        let ab = build_judge_net(&cfg, [4, 4, 1], &Head::Classes(vec!["a".into(), "b".into()]));
        let ba = build_judge_net(&cfg, [4, 4, 1], &Head::Classes(vec!["b".into(), "a".into()]));
        let (sa, sb) = (ab.state(), ba.state());
        let (wa, wb) = (&sa[sa.len() - 2], &sb[sb.len() - 2]);
        assert_eq!(wa[..4], wb[4..]);
        assert_eq!(wa[4..], wb[..4]);
    }
}
