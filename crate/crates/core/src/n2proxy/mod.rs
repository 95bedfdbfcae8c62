//! Access-side gateway: the binary signalling codec, the per-UE session
//! state machine that translates frames into function invocations, and a
//! transport for carrying frames over a byte stream.

pub mod codec;
pub mod dto;
pub mod proxy;
pub mod transport;

pub use codec::{cause, tag, CodecError, N2Frame, NasMsgType};
pub use dto::{dto_to_frame, frame_to_dto, FrameDto, FrameDtoError};
pub use proxy::{cause_for, CoreBackend, Downlink, N2Proxy, NasState, ProxyStats};
pub use transport::StreamTransport;
