/// Classifies incoming frame sequence numbers against the last accepted one,
/// modulo 2^16.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqTracker {
    last: Option<u16>,
    window: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqVerdict {
    Accepted,
    Duplicate,
    Stale,
}

pub const DEFAULT_SEQ_WINDOW: u16 = 1024;

impl Default for SeqTracker {
    fn default() -> Self {
        SeqTracker::new(DEFAULT_SEQ_WINDOW)
    }
}

impl SeqTracker {
    pub fn new(window: u16) -> Self {
        SeqTracker { last: None, window }
    }

    pub fn last(&self) -> Option<u16> {
        self.last
    }

    /// `s == last` is a duplicate, `s` in `(last, last + window]` is new,
    /// everything else is stale. The first frame is always new.
    pub fn classify(&self, seq: u16) -> SeqVerdict {
        let Some(last) = self.last else {
            return SeqVerdict::Accepted;
        };
        match seq.wrapping_sub(last) {
            0 => SeqVerdict::Duplicate,
            d if d <= self.window => SeqVerdict::Accepted,
            _ => SeqVerdict::Stale,
        }
    }

    pub fn accept(&mut self, seq: u16) {
        self.last = Some(seq);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_rules() {
        let mut t = SeqTracker::default();
        assert_eq!(t.classify(500), SeqVerdict::Accepted);
        t.accept(500);
        assert_eq!(t.classify(500), SeqVerdict::Duplicate);
        assert_eq!(t.classify(501), SeqVerdict::Accepted);
        assert_eq!(t.classify(1524), SeqVerdict::Accepted);
        assert_eq!(t.classify(1525), SeqVerdict::Stale);
        assert_eq!(t.classify(499), SeqVerdict::Stale);
    }

    #[test]
    fn wraps_around() {
        let mut t = SeqTracker::default();
        t.accept(65_530);
        assert_eq!(t.classify(65_535), SeqVerdict::Accepted);
        assert_eq!(t.classify(0), SeqVerdict::Accepted);
        assert_eq!(t.classify(1018), SeqVerdict::Accepted);
        assert_eq!(t.classify(1019), SeqVerdict::Stale);
        assert_eq!(t.classify(65_529), SeqVerdict::Stale);
    }
}
