//! Allocation accounting: the product path must never hold an n1×n2 dense buffer.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use lela::linalg::DenseMatrix;
use lela::matprod::{lowrank_product, ProductTask};

struct Tracking;

static ARMED: AtomicBool = AtomicBool::new(false);
static LARGEST: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Tracking {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        if ARMED.load(Ordering::Relaxed) {
            LARGEST.fetch_max(layout.size(), Ordering::Relaxed);
        }
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        if ARMED.load(Ordering::Relaxed) {
            LARGEST.fetch_max(new_size, Ordering::Relaxed);
        }
        unsafe { System.realloc(ptr, layout, new_size) }
    }
}

#[global_allocator]
static GLOBAL: Tracking = Tracking;

#[test]
fn never_allocates_the_dense_product() {
    let (n1, d, n2) = (400, 10, 400);
    let a = DenseMatrix::from_fn(n1, d, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    let b = DenseMatrix::from_fn(d, n2, |i, j| ((i * 5 + j * 13) % 9) as f64 - 4.0);
    let task = ProductTask::new(&a, &b, 3, 8000, 5, 1);
    ARMED.store(true, Ordering::SeqCst);
    let f = lowrank_product(&task).unwrap();
    ARMED.store(false, Ordering::SeqCst);
    let largest = LARGEST.load(Ordering::SeqCst);
    assert_eq!(f.rank(), 3);
    assert!(largest < n1 * n2 * 8, "largest allocation {largest} bytes");
}
