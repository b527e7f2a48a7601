use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lot {
    pub lot_id: String,
    pub lat: f64,
    pub lon: f64,
    pub street: String,
}

/// The set of instrumented parking lots, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct LotRegistry {
    lots: Vec<Lot>,
    index: HashMap<String, usize>,
}

impl LotRegistry {
    pub fn new(lots: Vec<Lot>) -> Result<Self> {
        let mut index = HashMap::with_capacity(lots.len());
        for (i, lot) in lots.iter().enumerate() {
            if lot.lot_id.is_empty() {
                return Err(Error::Data(format!("lot at row {} has an empty id", i + 1)));
            }
            if !(-90.0..=90.0).contains(&lot.lat) || !(-180.0..=180.0).contains(&lot.lon) {
                return Err(Error::Data(format!(
                    "lot {} has coordinates out of range ({}, {})",
                    lot.lot_id, lot.lat, lot.lon
                )));
            }
            if lot.street.trim().is_empty() {
                return Err(Error::Data(format!("lot {} has no street label", lot.lot_id)));
            }
            if index.insert(lot.lot_id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate lot id {}", lot.lot_id)));
            }
        }
        Ok(Self { lots, index })
    }

    /// Reads the `lot_id,lat,lon,street` CSV format.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let lots = rdr
            .deserialize::<Lot>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(lots)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lot_id", "lat", "lon", "street"])?;
        for lot in &self.lots {
            w.write_record([
                lot.lot_id.as_str(),
                &lot.lat.to_string(),
                &lot.lon.to_string(),
                lot.street.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn lots(&self) -> &[Lot] {
        &self.lots
    }

    pub fn len(&self) -> usize {
        self.lots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lots.is_empty()
    }

    pub fn position(&self, lot_id: &str) -> Option<usize> {
        self.index.get(lot_id).copied()
    }
}
