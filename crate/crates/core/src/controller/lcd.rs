use std::fmt;

use thiserror::Error;

use crate::lot::{LotSnapshot, SlotStatus};

pub const LCD_COLS: usize = 16;
pub const LCD_SLOTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LcdError {
    #[error("16x2 layout shows exactly {LCD_SLOTS} slots, lot has {0}")]
    UnsupportedLayout(usize),
}

/// Contents of a 16x2 character display.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LcdFrame {
    line1: String,
    line2: String,
}

impl LcdFrame {
    pub fn line1(&self) -> &str {
        &self.line1
    }

    pub fn line2(&self) -> &str {
        &self.line2
    }

    /// Both lines, each followed by `\n`. This is the golden-file format.
    pub fn to_text(&self) -> String {
        format!("{}\n{}\n", self.line1, self.line2)
    }
}

impl fmt::Display for LcdFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\n{}", self.line1, self.line2)
    }
}

fn cell_char(status: SlotStatus) -> char {
    match status {
        SlotStatus::Occupied => 'F',
        SlotStatus::Vacant => 'E',
        SlotStatus::OutOfService => 'S',
    }
}

pub fn render_lcd(snapshot: &LotSnapshot) -> Result<LcdFrame, LcdError> {
    if snapshot.slot_count() != LCD_SLOTS {
        return Err(LcdError::UnsupportedLayout(snapshot.slot_count()));
    }
    let line1: String = snapshot
        .statuses()
        .iter()
        .enumerate()
        .map(|(i, &s)| format!("{}:{} ", i + 1, cell_char(s)))
        .collect();
    let text = if snapshot.available() == 0 && snapshot.out_of_service() == 0 {
        "LOT FULL".to_string()
    } else {
        format!("Available: {}", snapshot.available())
    };
    let line2 = format!("{text:<width$}", width = LCD_COLS);
    debug_assert_eq!(line1.len(), LCD_COLS);
    debug_assert_eq!(line2.len(), LCD_COLS);
    Ok(LcdFrame { line1, line2 })
}
