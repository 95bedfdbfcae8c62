//! Frame transport over any byte stream.
//!
//! Frames are self-delimiting (the header carries the payload length), so
//! the transport needs no extra framing: it reads the fixed header, then
//! exactly the payload it announces. Works over a TCP stream, a Unix
//! socket, or any other `Read + Write` pair.

use std::io::{self, Read, Write};

use super::codec::{N2Frame, HEADER_LEN};

pub struct StreamTransport<T: Read + Write> {
    inner: T,
}

impl<T: Read + Write> StreamTransport<T> {
    pub fn new(inner: T) -> Self {
        StreamTransport { inner }
    }

    pub fn into_inner(self) -> T {
        self.inner
    }

    pub fn send(&mut self, frame: &N2Frame) -> io::Result<()> {
        let bytes = frame
            .encode()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        self.inner.write_all(&bytes)?;
        self.inner.flush()
    }

    /// Reads one frame. `Ok(None)` means the peer closed the stream
    /// cleanly at a frame boundary; closing mid-frame is an error.
    pub fn recv(&mut self) -> io::Result<Option<N2Frame>> {
        let mut header = [0u8; HEADER_LEN];
        match self.inner.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e),
        }
        let payload_len = u16::from_be_bytes([header[8], header[9]]) as usize;
        let mut buf = Vec::with_capacity(HEADER_LEN + payload_len);
        buf.extend_from_slice(&header);
        buf.resize(HEADER_LEN + payload_len, 0);
        self.inner.read_exact(&mut buf[HEADER_LEN..])?;
        N2Frame::decode(&buf)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}
