//! Allocation accounting for `build_embedded`.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

use stpod_core::{build_embedded, generate, GeneratorSpec};

struct Counting;

thread_local! {
    static BYTES: Cell<usize> = const { Cell::new(0) };
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        BYTES.with(|b| b.set(b.get() + layout.size()));
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        BYTES.with(|b| b.set(b.get() + new_size));
        unsafe { System.realloc(ptr, layout, new_size) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn allocated_during<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let before = BYTES.with(Cell::get);
    let out = f();
    (out, BYTES.with(Cell::get) - before)
}

#[test]
fn embedding_allocates_only_the_output_matrix() {
    let series = generate(&GeneratorSpec::scalar_ou(5.0, 1), 5000, 1.0).unwrap();
    for (d, s) in [(1, 1), (20, 1), (64, 1), (20, 7)] {
        let (data, bytes) = allocated_during(|| build_embedded(&series, d, s).unwrap());
        let output = data.values().len() * std::mem::size_of::<f64>();
        assert!(bytes >= output);
        assert!(bytes <= output + 256, "d={d} s={s}: {bytes} bytes for a {output}-byte matrix");
    }
}
