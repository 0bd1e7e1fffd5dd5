//! Read-only HTTP/JSON API over a persisted session, backing the
//! coordinated views of the explorer UI.

mod api;
mod server;
pub mod stats;

pub use api::{
    BarData, BoxData, Explorer, FeatureInfo, FeatureValue, LinkedStats, MapData, MapPoint, ModelMeta, NodeDetail,
    NodeSeries, PairedValue, Projection, Projections, SelectionRequest, SeriesData, SessionMeta,
};
pub use server::{router, serve, ErrorBody};
pub use stats::BoxStats;
