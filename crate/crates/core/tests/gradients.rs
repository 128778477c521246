//! Every backward pass against 64-bit central finite differences.

mod checks;
mod support;

use sgrnn_core::scan::Direction;

const TOL: f64 = 1e-4;

#[test]
fn conv_gradients() {
    let e = checks::conv_grad();
    assert!(e <= TOL, "conv {e:e}");
}

#[test]
fn deconv_gradients() {
    let e = checks::deconv_grad();
    assert!(e <= TOL, "deconv {e:e}");
}

#[test]
fn pool_gradients_away_from_ties() {
    let e = checks::pool_grad();
    assert!(e <= TOL, "pool {e:e}");
}

#[test]
fn upsample_gradients() {
    let e = checks::upsample_grad();
    assert!(e <= TOL, "upsample {e:e}");
}

#[test]
fn softmax_ce_gradient() {
    let e = checks::softmax_ce_grad();
    assert!(e <= TOL, "softmax ce {e:e}");
}

#[test]
fn sigmoid_bce_gradient() {
    let e = checks::sigmoid_bce_grad();
    assert!(e <= TOL, "sigmoid bce {e:e}");
}

#[test]
fn gated_scan_gradients_every_direction() {
    for dir in Direction::ALL {
        let [ex, eg, ew, eb] = checks::gated_scan_grad(dir);
        assert!(ex <= TOL && eg <= TOL && ew <= TOL && eb <= TOL, "{}: x {ex:e} g {eg:e} w {ew:e} b {eb:e}", dir.tag());
    }
}

#[test]
fn srnn_layer_gradients() {
    let e = checks::srnn_layer_grad();
    assert!(e <= TOL, "srnn layer {e:e}");
}

#[test]
fn total_loss_gradient_on_tiny_network() {
    for (name, e) in checks::total_loss_grad() {
        assert!(e <= TOL, "{name}: {e:e}");
    }
}
