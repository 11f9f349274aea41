use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MediaStatus {
    Playing,
    Paused,
    Stopped,
}

impl MediaStatus {
    /// A track is present exactly when something is loaded.
    pub fn track_consistent(self, track: Option<&str>) -> bool {
        match self {
            MediaStatus::Stopped => track.is_none(),
            MediaStatus::Playing | MediaStatus::Paused => track.is_some(),
        }
    }
}

impl fmt::Display for MediaStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Current playback status of the speaker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaSession {
    status: MediaStatus,
    track: Option<String>,
}

impl Default for MediaSession {
    fn default() -> Self {
        Self::stopped()
    }
}

impl MediaSession {
    pub fn stopped() -> Self {
        Self {
            status: MediaStatus::Stopped,
            track: None,
        }
    }

    pub fn playing(track: impl Into<String>) -> Self {
        Self {
            status: MediaStatus::Playing,
            track: Some(track.into()),
        }
    }

    pub fn status(&self) -> MediaStatus {
        self.status
    }

    pub fn track(&self) -> Option<&str> {
        self.track.as_deref()
    }

    pub fn is_consistent(&self) -> bool {
        self.status.track_consistent(self.track.as_deref())
    }

    /// Playing -> Paused. Returns whether anything changed.
    pub fn pause(&mut self) -> bool {
        if self.status == MediaStatus::Playing {
            self.status = MediaStatus::Paused;
            true
        } else {
            false
        }
    }

    /// Paused -> Playing. Returns whether anything changed.
    pub fn resume(&mut self) -> bool {
        if self.status == MediaStatus::Paused {
            self.status = MediaStatus::Playing;
            true
        } else {
            false
        }
    }

    pub fn stop(&mut self) -> bool {
        let changed = self.status != MediaStatus::Stopped;
        *self = Self::stopped();
        changed
    }
}
