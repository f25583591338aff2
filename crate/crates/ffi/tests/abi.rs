use std::ffi::{CStr, CString};
use std::ptr;

use spectral_wick_ffi::*;

fn kernel(shorthand: &str) -> *mut SwKernel {
    let text = CString::new(shorthand).unwrap();
    let mut k = ptr::null_mut();
    assert_eq!(
        unsafe { sw_kernel_new(text.as_ptr(), &mut k) },
        SwStatus::Ok
    );
    assert!(!k.is_null());
    k
}

fn last_error() -> String {
    let p = sw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn white_covariance_is_min() {
    let k = kernel("white");
    for (t, s) in [(0.5, 1.5), (2.0, 1.0), (1.0, 1.0)] {
        let mut v = f64::NAN;
        assert_eq!(
            unsafe { sw_kernel_covariance(k, t, s, &mut v) },
            SwStatus::Ok
        );
        assert!((v - f64::min(t, s)).abs() < 1e-9);
    }
    let mut r = 0.0;
    assert_eq!(unsafe { sw_kernel_variance(k, 2.5, &mut r) }, SwStatus::Ok);
    assert!((r - 2.5).abs() < 1e-9);
    unsafe { sw_kernel_free(k) };
}

#[test]
fn gram_is_symmetric() {
    let k = kernel("fractional:H=0.7");
    let times = [0.5, 1.0, 2.0];
    let mut g = [0.0; 9];
    let mut jitter = -1.0;
    assert_eq!(
        unsafe { sw_kernel_gram(k, times.as_ptr(), 3, g.as_mut_ptr(), &mut jitter) },
        SwStatus::Ok
    );
    assert_eq!(jitter, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(g[3 * i + j], g[3 * j + i]);
        }
    }
    assert_eq!(
        unsafe { sw_kernel_gram(k, times.as_ptr(), 3, ptr::null_mut(), ptr::null_mut()) },
        SwStatus::NullPointer
    );
    unsafe { sw_kernel_free(k) };
}

#[test]
fn sampling_is_deterministic() {
    let k = kernel("band-limited:delta=1");
    let times = [1.0, 2.0];
    let mut a = vec![0.0; 200];
    let mut b = vec![0.0; 200];
    for buf in [&mut a, &mut b] {
        assert_eq!(
            unsafe {
                sw_sample(
                    k,
                    times.as_ptr(),
                    2,
                    100,
                    7,
                    SwMethod::Cholesky,
                    buf.as_mut_ptr(),
                )
            },
            SwStatus::Ok
        );
    }
    assert_eq!(a, b);
    assert!(a.iter().any(|x| *x != 0.0));
    unsafe { sw_kernel_free(k) };
}

#[test]
fn probe_transforms() {
    let k = kernel("white");
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sw_probe_new(k, 0.5, 0.25, &mut p) }, SwStatus::Ok);
    let (mut mean, mut pw, mut norm) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(sw_probe_mean(p, 1.0, &mut mean), SwStatus::Ok);
        assert_eq!(sw_s_wick_power(p, 0.0, 1.0, 3, &mut pw), SwStatus::Ok);
        assert_eq!(sw_probe_norm_sq(p, &mut norm), SwStatus::Ok);
    }
    assert!((pw - mean.powi(3)).abs() < 1e-12);
    // With m = 1 the norm is the L2 norm of the bump.
    assert!((norm - 0.25 * std::f64::consts::PI.sqrt()).abs() < 1e-9);
    unsafe {
        sw_probe_free(p);
        sw_kernel_free(k);
    }
}

#[test]
fn hermite_values() {
    let mut v = 0.0;
    assert_eq!(unsafe { sw_hermite(3, 1.0, 2.0, &mut v) }, SwStatus::Ok);
    assert_eq!(v, 2.0);
    assert_eq!(
        unsafe { sw_hermite(65, 1.0, 2.0, &mut v) },
        SwStatus::Unsupported
    );
    assert!(last_error().contains("65"));
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("fractional:H=1.5").unwrap();
    let mut k = ptr::null_mut();
    let status = unsafe { sw_kernel_new(bad.as_ptr(), &mut k) };
    assert_ne!(status, SwStatus::Ok);
    assert!(k.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(
        unsafe { sw_kernel_new(ptr::null(), &mut k) },
        SwStatus::NullPointer
    );
    let mut v = 0.0;
    assert_eq!(
        unsafe { sw_kernel_covariance(ptr::null(), 1.0, 1.0, &mut v) },
        SwStatus::NullPointer
    );

    let k = kernel("white");
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { sw_probe_new(k, 0.0, -1.0, &mut p) },
        SwStatus::Validation
    );
    assert!(p.is_null());
    // A successful call clears the message.
    assert_eq!(
        unsafe { sw_kernel_covariance(k, 1.0, 1.0, &mut v) },
        SwStatus::Ok
    );
    assert!(sw_last_error().is_null());
    unsafe { sw_kernel_free(k) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
