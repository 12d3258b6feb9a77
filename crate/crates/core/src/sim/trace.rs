//! Epoch-trace CSV.
//!
//! Header: `process,i,S,S_prime,D,Y,X,W,L,start_age`, one row per recorded
//! delivery in delivery order. Processes are numbered from 1.

use std::io::Write;

use crate::error::Result;
use crate::sim::engine::EpochRecord;

pub const TRACE_HEADER: [&str; 10] = ["process", "i", "S", "S_prime", "D", "Y", "X", "W", "L", "start_age"];

pub fn write_trace<W: Write>(out: W, records: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            (r.process + 1).to_string(),
            r.i.to_string(),
            r.s.to_string(),
            r.s_prime.to_string(),
            r.d.to_string(),
            r.y.to_string(),
            r.x.to_string(),
            r.w.to_string(),
            r.l.to_string(),
            r.start_age.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row() {
        let r = EpochRecord {
            process: 0,
            i: 1,
            s: 1.0,
            s_prime: 1.5,
            d: 2.0,
            y: 1.0,
            x: 0.25,
            w: 0.0,
            l: 2.0,
            start_age: 0.5,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "process,i,S,S_prime,D,Y,X,W,L,start_age\n1,1,1,1.5,2,1,0.25,0,2,0.5\n");
    }
}
