use std::ffi::{CStr, CString};
use std::ptr;

use motionsep_ffi::*;

fn last_error() -> String {
    let p = ms_last_error();
    assert!(!p.is_null(), "an error message is set after a failure");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Interleaved pan field: every pixel moves by (dx, dy).
fn pan(width: usize, height: usize, dx: f64, dy: f64) -> *mut MsFlowField {
    let data: Vec<f64> = (0..width * height).flat_map(|_| [dx, dy]).collect();
    let mut flow = ptr::null_mut();
    let st = unsafe { ms_flow_new(width, height, data.as_ptr(), &mut flow) };
    assert_eq!(st, MsStatus::Ok);
    flow
}

fn copy_out(flow: *const MsFlowField) -> Vec<f64> {
    let (mut w, mut h) = (0, 0);
    unsafe {
        assert_eq!(ms_flow_dims(flow, &mut w, &mut h), MsStatus::Ok);
        let mut buf = vec![f64::NAN; 2 * w * h];
        assert_eq!(ms_flow_copy_data(flow, buf.as_mut_ptr(), buf.len()), MsStatus::Ok);
        buf
    }
}

#[test]
fn flow_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.flo").to_str().unwrap()).unwrap();
    let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.25 - 3.0).collect();
    unsafe {
        let mut flow = ptr::null_mut();
        assert_eq!(ms_flow_new(4, 3, data.as_ptr(), &mut flow), MsStatus::Ok);
        assert_eq!(ms_flow_write(flow, path.as_ptr()), MsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ms_flow_read(path.as_ptr(), &mut back), MsStatus::Ok);
        assert_eq!(copy_out(back), data);
        ms_flow_free(flow);
        ms_flow_free(back);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    let missing = CString::new("/nonexistent/dir/x.flo").unwrap();
    let mut flow = ptr::null_mut();
    unsafe {
        assert_eq!(ms_flow_read(missing.as_ptr(), &mut flow), MsStatus::Io);
        assert!(flow.is_null());
        assert!(last_error().contains("x.flo"));
        assert_eq!(ms_flow_read(ptr::null(), &mut flow), MsStatus::NullPointer);
        assert_eq!(ms_flow_dims(ptr::null(), ptr::null_mut(), ptr::null_mut()), MsStatus::NullPointer);

        let nan = [f64::NAN, 0.0];
        assert_eq!(ms_flow_new(1, 1, nan.as_ptr(), &mut flow), MsStatus::InvalidArgument);
        let zero = [0.0; 2];
        assert_eq!(ms_flow_new(0, 1, zero.as_ptr(), &mut flow), MsStatus::InvalidArgument);

        let f = pan(4, 4, 1.0, 0.0);
        let mut sep = ptr::null_mut();
        assert_eq!(ms_separate(f, -1.0, &mut sep), MsStatus::InvalidArgument);
        let mut small = [0u8; 5];
        assert_eq!(
            ms_flow_color_code(f, 0.0, small.as_mut_ptr(), small.len()),
            MsStatus::BufferTooSmall
        );
        ms_flow_free(f);
    }
    // success clears the message
    let (mut w, mut h) = (0, 0);
    let f = pan(2, 2, 0.0, 0.0);
    unsafe {
        assert_eq!(ms_flow_dims(f, &mut w, &mut h), MsStatus::Ok);
        ms_flow_free(f);
    }
    assert!(ms_last_error().is_null());
}

#[test]
fn free_accepts_null() {
    unsafe {
        ms_flow_free(ptr::null_mut());
        ms_separation_free(ptr::null_mut());
        ms_model_free(ptr::null_mut());
    }
}

#[test]
fn camera_only_field_separates_into_global() {
    let f = pan(24, 16, 2.5, -1.0);
    unsafe {
        let mut sep = ptr::null_mut();
        assert_eq!(ms_separate(f, 1.0, &mut sep), MsStatus::Ok);
        let (mut g, mut l) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(ms_separation_global(sep, &mut g), MsStatus::Ok);
        assert_eq!(ms_separation_local(sep, &mut l), MsStatus::Ok);
        assert_eq!(copy_out(g), copy_out(f));
        assert!(copy_out(l).iter().all(|v| *v == 0.0));

        let mut model = MsCameraModel { m0: 0.0, m1: 0.0, m2: 0.0, m3: 0.0 };
        assert_eq!(ms_fit_camera_model(g, &mut model), MsStatus::Ok);
        assert!((model.m0 - 1.0).abs() < 1e-12 && (model.m1 - 2.5).abs() < 1e-12);
        let mut label = MsCameraLabel::Static;
        assert_eq!(
            ms_classify_camera_motion(&model, 24, 16, -1.0, -1.0, &mut label),
            MsStatus::Ok
        );
        assert_eq!(label, MsCameraLabel::Composite);
        // content sliding left means the camera pans right
        let flat = MsCameraModel { m0: 1.0, m1: -3.0, m2: 1.0, m3: 0.0 };
        assert_eq!(
            ms_classify_camera_motion(&flat, 24, 16, -1.0, -1.0, &mut label),
            MsStatus::Ok
        );
        let name = CStr::from_ptr(ms_camera_label_name(label)).to_str().unwrap();
        assert_eq!(name, "pan-right");

        ms_separation_free(sep);
        ms_flow_free(g);
        ms_flow_free(l);
        ms_flow_free(f);
    }
}

#[test]
fn color_code_fills_buffer() {
    let f = pan(3, 2, 0.0, 0.0);
    let mut buf = vec![0u8; 18];
    unsafe {
        assert_eq!(ms_flow_color_code(f, 0.0, buf.as_mut_ptr(), buf.len()), MsStatus::Ok);
        ms_flow_free(f);
    }
    assert!(buf.iter().all(|b| *b == 255), "zero flow is white");
}

#[test]
fn event_indices() {
    let mut seen = std::collections::BTreeSet::new();
    let mut merged = std::collections::BTreeSet::new();
    for a in 0..6 {
        for s in 0..2u8 {
            let (mut i12, mut i11) = (0, 0);
            unsafe {
                assert_eq!(ms_event12_index(a, s, &mut i12), MsStatus::Ok);
                assert_eq!(ms_merge_steal_index(i12, &mut i11), MsStatus::Ok);
            }
            seen.insert(i12);
            merged.insert(i11);
        }
    }
    assert_eq!(seen.len(), 12);
    assert_eq!(merged.len(), 11);
    let mut i = 0;
    unsafe {
        assert_eq!(ms_event12_index(6, 0, &mut i), MsStatus::InvalidArgument);
        assert_eq!(ms_merge_steal_index(12, &mut i), MsStatus::InvalidArgument);
    }
}

#[test]
fn clip_success_is_strict() {
    let scores = [0.1, 0.7, 0.2];
    let mut out = 9u8;
    unsafe {
        assert_eq!(ms_clip_success(scores.as_ptr(), 3, 0.7, &mut out), MsStatus::Ok);
        assert_eq!(out, 0);
        assert_eq!(ms_clip_success(scores.as_ptr(), 3, 0.65, &mut out), MsStatus::Ok);
        assert_eq!(out, 1);
        assert_eq!(ms_clip_success(scores.as_ptr(), 3, 1.5, &mut out), MsStatus::InvalidArgument);
    }
}

#[test]
fn metrics_worked_example() {
    let counts = [3u64, 1, 1, 1];
    let (mut map, mut acc) = (0.0, 0.0);
    unsafe {
        assert_eq!(ms_mean_average_precision(counts.as_ptr(), 2, &mut map), MsStatus::Ok);
        assert_eq!(ms_accuracy(counts.as_ptr(), 2, &mut acc), MsStatus::Ok);
        assert_eq!(ms_accuracy(counts.as_ptr(), 0, &mut acc), MsStatus::InvalidArgument);
    }
    assert_eq!(map, 0.625);
    assert_eq!(acc, 4.0 / 6.0);
}

#[test]
fn model_load_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.txt");
    std::fs::write(&p, "not a model\n").unwrap();
    let path = CString::new(p.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(ms_model_load(path.as_ptr(), &mut m), MsStatus::Format);
    }
    assert!(m.is_null());
}

#[test]
fn untrained_model_gives_uniform_probabilities() {
    use motionsep::pipeline::ModelBundle;
    use motionsep::{DescriptorConfig, SoftmaxModel, StreamKind};
    let descriptor = DescriptorConfig::default();
    let zeros = SoftmaxModel::zeros(6, descriptor.len());
    let bundle = ModelBundle {
        descriptor,
        threshold: 1.0,
        streams: vec![(StreamKind::Global, zeros.clone()), (StreamKind::Local, zeros)],
    };
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.txt");
    std::fs::write(&p, bundle.to_text()).unwrap();
    let path = CString::new(p.to_str().unwrap()).unwrap();

    let frames: Vec<*mut MsFlowField> = (0..8).map(|_| pan(32, 32, -2.0, 0.0)).collect();
    let views: Vec<*const MsFlowField> = frames.iter().map(|f| *f as *const _).collect();
    let mut probs = [0.0; 6];
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(ms_model_load(path.as_ptr(), &mut m), MsStatus::Ok);
        assert_eq!(
            ms_model_classify_clip(m, views.as_ptr(), views.len(), 1.0, probs.as_mut_ptr(), 6),
            MsStatus::Ok
        );
        assert_eq!(
            ms_model_classify_clip(m, views.as_ptr(), views.len(), 1.0, probs.as_mut_ptr(), 5),
            MsStatus::BufferTooSmall
        );
        ms_model_free(m);
        frames.into_iter().for_each(|f| ms_flow_free(f));
    }
    assert!(probs.iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-12), "{probs:?}");
}
