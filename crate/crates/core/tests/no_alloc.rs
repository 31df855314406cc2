//! Proves the inference kernels never touch the heap: a counting global
//! allocator runs under the whole test binary, and the counter must not
//! move while the kernels execute.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use tinyoz_core::datapipe::{FeatureRole, Scaler};
use tinyoz_core::inferkernel::{infer_f32, infer_packed, infer_q8};
use tinyoz_core::modelpack::quantize;
use tinyoz_core::regress::LinearModel;
use tinyoz_core::PackedModel;

struct CountingAllocator;

static ALLOCATIONS: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCATIONS.fetch_add(1, Ordering::SeqCst);
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        ALLOCATIONS.fetch_add(1, Ordering::SeqCst);
        unsafe { System.realloc(ptr, layout, new_size) }
    }
}

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

#[test]
fn inference_kernels_do_not_allocate() {
    let model = LinearModel::new(
        vec![1.5, -0.75, 0.25],
        2.0,
        Scaler::new(vec![9.0, 21.0, 1010.0], vec![2.0, 5.0, 6.0]).unwrap(),
        FeatureRole::PREDICTORS.to_vec(),
    )
    .unwrap();
    let quantized = quantize(&model);
    let packed_float = PackedModel::Float(model.clone());
    let packed_q = PackedModel::Quantized(quantized.clone());
    let inputs: Vec<[f64; 3]> = (0..1000)
        .map(|i| {
            let t = i as f64 / 999.0;
            [9.0 + 6.0 * (t - 0.5), 21.0 + 30.0 * (t - 0.5), 1000.0 + 20.0 * t]
        })
        .collect();

    let before = ALLOCATIONS.load(Ordering::SeqCst);
    let mut sink = 0.0f64;
    for x in &inputs {
        sink += infer_f32(&model, x).unwrap();
        sink += infer_q8(&quantized, x).unwrap();
        sink += infer_packed(&packed_float, x).unwrap();
        sink += infer_packed(&packed_q, x).unwrap();
    }
    let after = ALLOCATIONS.load(Ordering::SeqCst);

    assert!(sink.is_finite());
    assert_eq!(after, before, "inference allocated {} times", after - before);

    // the error paths must be heap-free too
    let before = ALLOCATIONS.load(Ordering::SeqCst);
    for x in &inputs {
        let short = &x[..2];
        assert!(infer_f32(&model, short).is_err());
        assert!(infer_q8(&quantized, &[x[0], f64::NAN, x[2]]).is_err());
    }
    let after = ALLOCATIONS.load(Ordering::SeqCst);
    assert_eq!(after, before, "kernel errors allocated {} times", after - before);
}
