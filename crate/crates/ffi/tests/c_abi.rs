use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use pointup::io::save_checkpoint;
use pointup::pipeline::{BackboneKind, BackboneSpec, Model, ModelSpec};
use pointup::units::{ExpansionSpec, UnitKind};
use pointup_ffi::*;

fn cloud(pts: &[[f64; 3]]) -> *mut PuCloud {
    let flat: Vec<f64> = pts.iter().flatten().copied().collect();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pu_cloud_new(flat.as_ptr(), pts.len(), &mut out) }, PuStatus::Ok);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pu_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn metrics_match_hand_values() {
    let p = cloud(&[[0.0, 0.0, 0.0]]);
    let q = cloud(&[[3.0, 4.0, 0.0]]);
    let (mut cd, mut hd) = (0.0, 0.0);
    unsafe {
        assert_eq!(pu_chamfer(p, q, &mut cd), PuStatus::Ok);
        assert_eq!(pu_hausdorff(p, q, &mut hd), PuStatus::Ok);
        pu_cloud_free(p);
        pu_cloud_free(q);
    }
    assert_eq!((cd, hd), (50.0, 5.0));
}

#[test]
fn errors_carry_status_and_message() {
    let mut out = ptr::null_mut();
    let st = unsafe { pu_cloud_new(ptr::null(), 3, &mut out) };
    assert_eq!(st, PuStatus::NullPointer);
    assert!(out.is_null());
    assert!(last_error().contains("null"));

    let st = unsafe { pu_cloud_new([0.0f64; 0].as_ptr(), 0, &mut out) };
    assert_eq!(st, PuStatus::InvalidArgument);
    assert!(!last_error().is_empty());

    let missing = CString::new("/nonexistent/dir/model.puxp").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { pu_model_load(missing.as_ptr(), &mut model) }, PuStatus::Io);
    assert!(model.is_null());

    let c = cloud(&[[0.0; 3], [1.0, 0.0, 0.0]]);
    let mut buf = [0.0; 3];
    assert_eq!(unsafe { pu_cloud_copy_points(c, buf.as_mut_ptr(), 1) }, PuStatus::BufferTooSmall);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { pu_knn(c, 5, &mut g) }, PuStatus::InvalidArgument);
    unsafe { pu_cloud_free(c) };
    // freeing null is a no-op
    unsafe {
        pu_cloud_free(ptr::null_mut());
        pu_model_free(ptr::null_mut());
        pu_graph_free(ptr::null_mut());
        pu_mesh_free(ptr::null_mut());
    }
}

#[test]
fn knn_and_expansion() {
    let c = cloud(&[[0.0; 3], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.5, 0.0, 0.0]]);
    let (mut g, mut e) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(pu_knn(c, 2, &mut g), PuStatus::Ok);
        assert_eq!((pu_graph_rows(g), pu_graph_k(g)), (4, 2));
        let mut entries = [0usize; 8];
        assert_eq!(pu_graph_copy_entries(g, entries.as_mut_ptr(), 8), PuStatus::Ok);
        assert_eq!(entries, [1, 2, 0, 2, 3, 1, 2, 1]);

        assert_eq!(pu_graph_expand(g, &mut e), PuStatus::Ok);
        assert_eq!(pu_graph_rows(e), 8);
        let mut expanded = [0usize; 16];
        assert_eq!(pu_graph_copy_entries(e, expanded.as_mut_ptr(), 16), PuStatus::Ok);
        assert_eq!(&expanded[..4], &[2, 4, 2, 4]);
        pu_graph_free(g);
        pu_graph_free(e);
        pu_cloud_free(c);
    }
}

#[test]
fn load_and_upsample_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ModelSpec {
        backbone: BackboneSpec {
            kind: BackboneKind::EdgeConvStack,
            depth: 1,
            width: 8,
        },
        unit: ExpansionSpec::new(UnitKind::ProEdgeShuffle, 4, 8, 4),
    };
    let model_path = dir.path().join("m.puxp");
    save_checkpoint(&model_path, &Model::new(spec, 3).unwrap()).unwrap();
    let xyz_path = dir.path().join("in.xyz");
    let pts: String = (0..10).map(|i| format!("{} {} {}\n", i as f64 * 0.1, (i * i) as f64 * 0.01, 0.5)).collect();
    std::fs::write(&xyz_path, pts).unwrap();

    let mp = CString::new(model_path.to_str().unwrap()).unwrap();
    let xp = CString::new(xyz_path.to_str().unwrap()).unwrap();
    let op = CString::new(dir.path().join("out.xyz").to_str().unwrap()).unwrap();
    unsafe {
        let (mut m, mut input, mut dense) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(pu_model_load(mp.as_ptr(), &mut m), PuStatus::Ok, "{}", last_error());
        assert_eq!(pu_model_ratio(m), 4);
        assert_eq!(pu_cloud_read_xyz(xp.as_ptr(), &mut input), PuStatus::Ok);
        assert_eq!(pu_model_upsample(m, input, &mut dense), PuStatus::Ok, "{}", last_error());
        assert_eq!(pu_cloud_len(dense), 40);
        assert_eq!(pu_cloud_write_xyz(dense, op.as_ptr()), PuStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(pu_cloud_read_xyz(op.as_ptr(), &mut back), PuStatus::Ok);
        assert_eq!(pu_cloud_len(back), 40);
        for h in [input, dense, back] {
            pu_cloud_free(h);
        }
        pu_model_free(m);
    }

    // a corrupted checkpoint is reported, not half-loaded
    let mut bytes = std::fs::read(&model_path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&model_path, bytes).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pu_model_load(mp.as_ptr(), &mut m) }, PuStatus::Checkpoint);
    assert!(m.is_null());
    assert!(last_error().contains("truncated"), "{}", last_error());
}

#[test]
fn point_to_face_via_off() {
    let dir = tempfile::tempdir().unwrap();
    let off = dir.path().join("t.off");
    std::fs::write(&off, "OFF\n3 1 0\n0 0 0\n2 0 0\n0 2 0\n3 0 1 2\n").unwrap();
    let path = CString::new(off.to_str().unwrap()).unwrap();
    let p = cloud(&[[0.0, 0.0, 1.0], [0.0, 0.0, 3.0]]);
    unsafe {
        let mut mesh = ptr::null_mut();
        let mut dropped = 99;
        assert_eq!(pu_mesh_read_off(path.as_ptr(), &mut mesh, &mut dropped), PuStatus::Ok);
        assert_eq!(dropped, 0);
        let mut v = 0.0;
        assert_eq!(pu_point_to_face(p, mesh, &mut v), PuStatus::Ok);
        assert_eq!(v, 2.0);
        pu_mesh_free(mesh);
        pu_cloud_free(p);
    }
}

#[test]
fn header_is_valid_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/pointup.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["pu_model_load", "pu_model_upsample", "pu_chamfer", "pu_hausdorff", "pu_knn", "pu_graph_expand", "pu_last_error", "PU_STATUS_OK"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not available; skipped header compile"),
        }
    }
}

#[test]
fn c_program_links_against_static_library() {
    // target/<profile>/deps/<test exe> -> target/<profile>/libpointup_ffi.a
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|d| d.parent()).unwrap().join("libpointup_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipped link test", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("metrics");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let built = Command::new("cc")
        .arg(format!("{manifest}/examples/metrics.c"))
        .arg(format!("-I{manifest}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status();
    match built {
        Ok(s) => assert!(s.success(), "C example failed to build"),
        Err(_) => {
            eprintln!("cc not available; skipped link test");
            return;
        }
    }
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "cd=50 hd=5\nknn=1,2 rows=8\nerror=set\n");
}
