//! Analytical objects of the long-time behaviour: attraction domains,
//! total-monopoly probabilities, limit shares, strong-monopoly bounds,
//! fluctuation cumulants and regime reports.

mod cgf;
mod domain;
pub(crate) mod expansion;
mod limits;
mod report;
mod tmon;

pub use cgf::{cgf_u, CgfReport};
pub use domain::{classify_domain, DomainClassification, DomainMethod, DomainOutcome, DomainVerdict, Threshold};
pub use limits::{
    exp_decreasing_limit, limit_shares, limit_shares_from_inverses, share_floor, smon_lower_bound, LimitShares,
    LimitVerdict, SmonBound,
};
pub use report::{regime_report, AgentReport, BoundsReport, JointVerdict, RegimeReport};
pub use tmon::{exact_tmon_probability, tmon_bounds, tmon_bounds_from_counts, TmonBounds};
