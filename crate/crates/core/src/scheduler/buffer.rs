use crate::error::{Error, Result};
use crate::types::ActionVector;

/// Contents of one buffer cell as seen after the fact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Empty,
    /// Committed and eligible for ensembling at its column.
    Live(&'a ActionVector),
    /// Committed after its column had already been executed.
    Dropped(&'a ActionVector),
}

#[derive(Debug, Clone)]
struct RowSpan {
    first_col: usize,
    live_from: usize,
    actions: Vec<ActionVector>,
}

impl RowSpan {
    fn last_col(&self) -> usize {
        self.first_col + self.actions.len() - 1
    }
}

/// The `rows x cols` container of committed predictions. Row `r` holds the
/// chunk of prediction `r`; column `c` is the absolute execution step the
/// action targets. Each row is written once as a contiguous span.
#[derive(Debug, Clone)]
pub struct EnsembleBuffer {
    cols: usize,
    rows: Vec<Option<RowSpan>>,
    // committed rows in increasing order
    committed: Vec<usize>,
}

impl EnsembleBuffer {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![None; rows],
            committed: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows_used(&self) -> usize {
        self.committed.len()
    }

    /// Writes `actions` into `row` starting at column `first_col`. Columns
    /// below `live_from` are recorded as dropped.
    pub fn write_row(
        &mut self,
        row: usize,
        first_col: usize,
        live_from: usize,
        actions: Vec<ActionVector>,
    ) -> Result<()> {
        if actions.is_empty() {
            return Err(Error::Protocol("empty chunk".into()));
        }
        let last = first_col + actions.len() - 1;
        if row >= self.rows.len() || last >= self.cols {
            return Err(Error::BufferWrite {
                row,
                col: last.min(self.cols),
            });
        }
        if self.rows[row].is_some() {
            return Err(Error::BufferWrite {
                row,
                col: first_col,
            });
        }
        if let Some(&prev) = self.committed.last() {
            if prev > row {
                return Err(Error::Protocol(format!(
                    "row {row} committed after row {prev}"
                )));
            }
        }
        self.rows[row] = Some(RowSpan {
            first_col,
            live_from,
            actions,
        });
        self.committed.push(row);
        Ok(())
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell<'_> {
        match self.rows.get(row).and_then(Option::as_ref) {
            Some(span) if col >= span.first_col && col <= span.last_col() => {
                let a = &span.actions[col - span.first_col];
                if col >= span.live_from {
                    Cell::Live(a)
                } else {
                    Cell::Dropped(a)
                }
            }
            _ => Cell::Empty,
        }
    }

    /// Live actions at column `col`, oldest row first.
    pub fn column(&self, col: usize) -> Vec<(usize, &ActionVector)> {
        let mut out = Vec::new();
        for &row in self.committed.iter().rev() {
            let span = self.rows[row].as_ref().expect("committed row");
            if span.last_col() < col {
                break;
            }
            if col >= span.live_from && col >= span.first_col {
                out.push((row, &span.actions[col - span.first_col]));
            }
        }
        out.reverse();
        out
    }
}
