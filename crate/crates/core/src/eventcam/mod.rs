//! Synthetic downward-facing event camera.
//!
//! The pipeline is: render the log intensity of every enabled pixel at each
//! 1 kHz pose, emit threshold-crossing events between consecutive renders,
//! then bin the stream into 5 ms two-channel count frames.

mod camera;
mod events;
mod frames;
mod io;
mod mask;
mod render;
mod sensor;
mod texture;

pub use camera::{project, CameraModel, Pose, Projection};
pub use events::{generate_events, Event, EventConfig, EventGenerator, EventStats, EventStream, Polarity};
pub use frames::{accumulate_frames, apply_mask_or_crop, EventFrame, FrameBatch, BIN_US};
pub use io::{read_event_file, EventFileHeader, EventFileWriter, EVENT_FILE_MAGIC};
pub use mask::{MaskMode, PixelMask};
pub use render::{render_log_intensity, RayTable, BACKGROUND_INTENSITY};
pub use sensor::{OnlineCamera, SensorSetup, DEFAULT_FRAME_CAP};
pub use texture::{SceneTexture, TextureStyle};
