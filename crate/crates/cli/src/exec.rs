use sgrnn_core::scan::{record_scan, GateMap, ScanExecutor, ScanParams, ScanTape, Sequential};
use sgrnn_core::{Real, Result, Tensor};

/// Runs the four directional scans on up to `threads` OS threads.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    pub threads: usize,
}

impl ScanExecutor for Threaded {
    fn run<T: Real>(&self, x: &Tensor<T>, gate: &GateMap<T>, params: &[ScanParams<T>; 4]) -> Result<[ScanTape<T>; 4]> {
        if self.threads <= 1 {
            return Sequential.run(x, gate, params);
        }
        let per = 4usize.div_ceil(self.threads.min(4));
        let results: Vec<Result<ScanTape<T>>> = std::thread::scope(|s| {
            let handles: Vec<_> = params
                .chunks(per)
                .map(|chunk| s.spawn(move || chunk.iter().map(|p| record_scan(x, gate, p)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("scan worker panicked")).collect()
        });
        let mut it = results.into_iter();
        Ok([it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?])
    }
}
