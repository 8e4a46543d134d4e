use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

use peeg_acquisition::{Overflow, Pipeline};

use crate::{SessionError, SessionWriter};

/// Subscriber queue depth. Recording never drops: a full queue stalls the producer.
const QUEUE_BLOCKS: usize = 256;

/// Writes every block of a pipeline to a session until the stream ends.
pub struct Recorder<W: Write + Send + 'static> {
    writer: Arc<Mutex<Option<SessionWriter<W>>>>,
    thread: Option<JoinHandle<Result<u64, SessionError>>>,
}

impl<W: Write + Send + 'static> Recorder<W> {
    /// Subscribes before returning, so call this before starting the pipeline
    /// to capture the first block.
    pub fn start(pipeline: &Pipeline, writer: SessionWriter<W>) -> Result<Self, SessionError> {
        let sub = pipeline
            .subscribe_with(QUEUE_BLOCKS, Overflow::Block)
            .map_err(|e| SessionError::Malformed(format!("cannot subscribe: {e}")))?;
        let writer = Arc::new(Mutex::new(Some(writer)));
        let shared = Arc::clone(&writer);
        let thread = std::thread::Builder::new()
            .name("peeg-recorder".into())
            .spawn(move || {
                let mut blocks = 0;
                for block in sub {
                    let mut guard = lock(&shared);
                    let w = guard.as_mut().expect("writer present until finish");
                    w.write_block(&block)?;
                    blocks += 1;
                }
                Ok(blocks)
            })?;
        Ok(Self {
            writer,
            thread: Some(thread),
        })
    }

    pub fn annotate(&self, time_s: f64, text: &str) -> Result<(), SessionError> {
        self.annotator().annotate(time_s, text)
    }

    /// A cloneable handle that adds annotations from other threads.
    pub fn annotator(&self) -> Annotator<W> {
        Annotator {
            writer: Arc::clone(&self.writer),
        }
    }

    pub fn is_done(&self) -> bool {
        self.thread.as_ref().map_or(true, |t| t.is_finished())
    }

    /// Waits for the stream to end, then writes the footer.
    pub fn finish(mut self) -> Result<W, SessionError> {
        let thread = self.thread.take().expect("joined once");
        let result = thread
            .join()
            .map_err(|_| SessionError::Malformed("recorder thread panicked".into()))?;
        let writer = lock(&self.writer).take().expect("writer present until finish");
        result?;
        writer.finish()
    }
}

pub struct Annotator<W: Write + Send + 'static> {
    writer: Arc<Mutex<Option<SessionWriter<W>>>>,
}

impl<W: Write + Send + 'static> Clone for Annotator<W> {
    fn clone(&self) -> Self {
        Self {
            writer: Arc::clone(&self.writer),
        }
    }
}

impl<W: Write + Send + 'static> Annotator<W> {
    pub fn annotate(&self, time_s: f64, text: &str) -> Result<(), SessionError> {
        match lock(&self.writer).as_mut() {
            Some(w) => w.annotate(time_s, text),
            None => Err(SessionError::Malformed("recording already finished".into())),
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}
