//! Maximum matching on a dynamic forest.
//!
//! [`MatchingForest`] keeps the maximum matching value of every component
//! under edge insertions and deletions. Edges are grouped into a
//! level-structured top tree; each cluster stores the best matching for
//! each of the four matched/unmatched colorings of its two boundary
//! vertices, so a component's answer sits at its root cluster.
//!
//! ```
//! use treematch::{Matching, MatchingForest, VertexId};
//!
//! let mut f = MatchingForest::new(Matching::unweighted());
//! for (a, b) in [(0, 2), (1, 2), (2, 3), (3, 4)] {
//!     f.link(VertexId(a), VertexId(b), 1).unwrap();
//! }
//! assert_eq!(f.matching_cardinality(VertexId(0)).get(), Some(2));
//! ```

pub mod annot;
pub mod forest;
pub mod oracle;
pub mod query;
pub mod toptree;
pub mod trees;

pub use annot::{Color, MatchTable, MatchValue, Matching, State};
pub use forest::{Edge, EdgeId, Forest, ForestError, VertexId};
pub use query::{ChoiceSet, EdgeConstraint, EdgeStatus, MatchingForest, QueryError, Tristate};
pub use toptree::{Annotation, ClusterId, ClusterKind, ClusterView, InvariantViolation, TopForest, UpdateStats};
