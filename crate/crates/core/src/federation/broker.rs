use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, RwLock};

use crate::error::{Error, Result};
use crate::federation::wire::{decode, encode, Frame, MsgType};
use crate::gcn::{full_products, EmbeddingSource, GcnWeights};
use crate::graphstore::ClientGraph;
use crate::numkit::Matrix;

/// Boundary rows `h_j^(l)(u)·W_j^(l)` served by client `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingShare {
    pub source: usize,
    pub layer: usize,
    pub round: usize,
    pub ids: Vec<usize>,
    pub rows: Matrix,
    /// Size of the encoded share message.
    pub wire_bytes: usize,
}

/// One logged message.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub msg_type: MsgType,
    pub round: u32,
    pub src: u16,
    pub dst: u16,
    pub layer: u8,
    pub count: usize,
    pub width: usize,
    pub bytes: usize,
    /// Some payload row coincides with a raw feature row of the sender.
    pub raw_feature_payload: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub messages: usize,
    pub shares: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug)]
struct Published {
    round: usize,
    /// `products[l-1] = h^(l)·W^(l)` over every local node.
    products: Vec<Matrix>,
}

/// In-process exchange broker.
///
/// Clients publish their current weights; the broker then answers boundary
/// requests with rows computed from the owner's full internal
/// neighbourhood, without dropout. All traffic passes through the wire
/// encoder and is logged for audit.
pub struct Broker<'a> {
    clients: &'a [ClientGraph],
    /// `exports[owner][requester]`: global ids the requester may ask for.
    exports: Vec<HashMap<usize, HashSet<usize>>>,
    allow_first_layer: bool,
    published: RwLock<Vec<Option<Arc<Published>>>>,
    log: Mutex<Vec<AuditRecord>>,
}

impl<'a> Broker<'a> {
    pub fn new(clients: &'a [ClientGraph]) -> Self {
        let mut exports: Vec<HashMap<usize, HashSet<usize>>> = vec![HashMap::new(); clients.len()];
        for cg in clients {
            for e in cg.boundary_edges() {
                if let Some(table) = exports.get_mut(e.remote_client) {
                    table.entry(cg.id).or_default().insert(e.remote_global);
                }
            }
        }
        Broker {
            clients,
            exports,
            allow_first_layer: false,
            published: RwLock::new(vec![None; clients.len()]),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Lets layer-1 products (`x·W^(1)`) cross clients. Breaks the privacy
    /// contract; only for the all-share ablation.
    pub fn allow_first_layer(mut self, allow: bool) -> Self {
        self.allow_first_layer = allow;
        self
    }

    /// Global ids client `requester` may request from `owner`.
    pub fn authorized(&self, owner: usize, requester: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.exports[owner]
            .get(&requester)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        v.sort_unstable();
        v
    }

    /// Computes and caches every product client `client` can serve under
    /// weights `w`, replacing whatever was published before.
    pub fn publish(&self, client: usize, round: usize, w: &GcnWeights) -> Result<()> {
        let cg = self
            .clients
            .get(client)
            .ok_or_else(|| Error::Exchange(format!("unknown client {client}")))?;
        let products = full_products(&cg.internal, &cg.features, w)?;
        self.published.write().expect("broker lock")[client] = Some(Arc::new(Published { round, products }));
        Ok(())
    }

    pub fn clear(&self) {
        self.published.write().expect("broker lock").iter_mut().for_each(|p| *p = None);
    }

    /// Serves layer-`layer` rows of `ids` from `owner` to `requester`.
    pub fn serve(&self, requester: usize, owner: usize, layer: usize, ids: &[usize]) -> Result<EmbeddingShare> {
        if layer < 2 && !(layer == 1 && self.allow_first_layer) {
            return Err(Error::PrivacyViolation(format!(
                "client {requester} requested layer-{layer} rows from client {owner}; only layers ≥ 2 may be shared"
            )));
        }
        if owner >= self.clients.len() || requester >= self.clients.len() {
            return Err(Error::Exchange(format!("unknown client in request {requester} → {owner}")));
        }
        let allowed = self.exports[owner].get(&requester);
        if let Some(&u) = ids.iter().find(|u| !allowed.is_some_and(|s| s.contains(u))) {
            return Err(Error::Authorization(format!(
                "node {u} is not a registered boundary neighbour of client {requester} held by client {owner}"
            )));
        }
        let published = self.published.read().expect("broker lock")[owner]
            .clone()
            .ok_or_else(|| Error::Exchange(format!("client {owner} has not published weights")))?;
        if layer > published.products.len() {
            return Err(Error::Exchange(format!(
                "layer {layer} has no served product in a {}-layer model",
                published.products.len() + 1
            )));
        }
        let round = published.round;

        let request = Frame {
            msg_type: MsgType::Request,
            round: round as u32,
            src: requester as u16,
            dst: owner as u16,
            layer: layer as u8,
            ids: ids.iter().map(|&u| u as u32).collect(),
            payload: Vec::new(),
        };
        let req_bytes = encode(&request)?;
        let (request, _) = decode(&req_bytes)?;
        self.record(&request, req_bytes.len(), false);

        let cg = &self.clients[owner];
        let product = &published.products[layer - 1];
        let width = product.cols();
        let mut payload = Vec::with_capacity(ids.len() * width);
        let mut raw = false;
        for &u in &request.ids {
            let v = cg
                .local_of(u as usize)
                .ok_or_else(|| Error::Authorization(format!("client {owner} does not hold node {u}")))?;
            let row = product.row(v);
            raw |= width == cg.feature_dim() && row == cg.features.row(v);
            payload.extend_from_slice(row);
        }
        let reply = Frame {
            msg_type: MsgType::Share,
            round: round as u32,
            src: owner as u16,
            dst: requester as u16,
            layer: layer as u8,
            ids: request.ids,
            payload,
        };
        let bytes = encode(&reply)?;
        let (reply, _) = decode(&bytes)?;
        self.record(&reply, bytes.len(), raw);
        let n = reply.ids.len();
        Ok(EmbeddingShare {
            source: owner,
            layer,
            round,
            ids: reply.ids.iter().map(|&u| u as usize).collect(),
            rows: Matrix::from_vec(n, if n == 0 { width } else { reply.width() }, reply.payload)?,
            wire_bytes: bytes.len(),
        })
    }

    fn record(&self, f: &Frame, bytes: usize, raw_feature_payload: bool) {
        self.log.lock().expect("audit lock").push(AuditRecord {
            msg_type: f.msg_type,
            round: f.round,
            src: f.src,
            dst: f.dst,
            layer: f.layer,
            count: f.ids.len(),
            width: f.width(),
            bytes,
            raw_feature_payload,
        });
    }

    pub fn messages(&self) -> Vec<AuditRecord> {
        self.log.lock().expect("audit lock").clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().expect("audit lock").clear();
    }

    /// Checks every logged message against the sharing contract.
    pub fn audit(&self) -> AuditReport {
        let log = self.log.lock().expect("audit lock");
        let mut report = AuditReport {
            messages: log.len(),
            ..Default::default()
        };
        for (k, m) in log.iter().enumerate() {
            if m.msg_type == MsgType::Share {
                report.shares += 1;
            }
            if m.layer < 2 {
                report.violations.push(format!(
                    "message {k} ({:?} {} → {}) carries layer {}",
                    m.msg_type, m.src, m.dst, m.layer
                ));
            }
            if m.raw_feature_payload {
                report
                    .violations
                    .push(format!("message {k} ({} → {}) carries raw feature rows", m.src, m.dst));
            }
            if m.msg_type == MsgType::Request && m.width != 0 {
                report.violations.push(format!("request {k} carries a payload"));
            }
        }
        report
    }
}

impl EmbeddingSource for Broker<'_> {
    fn fetch(&self, requester: usize, owner: usize, layer: usize, ids: &[usize]) -> Result<EmbeddingShare> {
        self.serve(requester, owner, layer, ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{partition_with_assignment, Graph, Split};
    use crate::numkit::RngStream;

    fn path_clients() -> Vec<ClientGraph> {
        let edges = [(0, 1), (1, 2), (2, 3)];
        let mut rng = RngStream::new(4);
        let x = Matrix::from_fn(4, 3, |_, _| rng.normal());
        let mut g = Graph::from_edges(4, &edges, x, vec![0, 1, 0, 1], 2).unwrap();
        g.split = vec![Split::Train; 4];
        partition_with_assignment(&g, vec![vec![0, 1], vec![2, 3]]).unwrap().clients
    }

    #[test]
    fn first_layer_is_refused() {
        let clients = path_clients();
        let broker = Broker::new(&clients);
        let w = GcnWeights::glorot(&[3, 4, 2], &mut RngStream::new(1));
        broker.publish(1, 0, &w).unwrap();
        assert!(matches!(broker.serve(0, 1, 1, &[2]), Err(Error::PrivacyViolation(_))));
        assert!(broker.messages().is_empty());
        assert!(broker.serve(0, 1, 2, &[2]).is_ok());
    }

    #[test]
    fn unregistered_node_is_refused() {
        let clients = path_clients();
        let broker = Broker::new(&clients);
        broker.publish(1, 0, &GcnWeights::zeros(&[3, 4, 2])).unwrap();
        assert_eq!(broker.authorized(1, 0), vec![2]);
        assert!(matches!(broker.serve(0, 1, 2, &[3]), Err(Error::Authorization(_))));
    }

    #[test]
    fn unpublished_owner_is_an_exchange_error() {
        let clients = path_clients();
        let broker = Broker::new(&clients);
        assert!(matches!(broker.serve(0, 1, 2, &[2]), Err(Error::Exchange(_))));
    }

    #[test]
    fn repeated_requests_are_identical_and_audited() {
        let clients = path_clients();
        let broker = Broker::new(&clients);
        let w = GcnWeights::glorot(&[3, 4, 2], &mut RngStream::new(1));
        broker.publish(1, 3, &w).unwrap();
        let a = broker.serve(0, 1, 2, &[2]).unwrap();
        let b = broker.serve(0, 1, 2, &[2]).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.round, a.rows.shape()), (3, (1, 2)));
        let report = broker.audit();
        assert_eq!((report.messages, report.shares), (4, 2));
        assert!(report.is_clean());
    }

    #[test]
    fn all_share_rows_are_flagged() {
        let clients = path_clients();
        let broker = Broker::new(&clients).allow_first_layer(true);
        broker.publish(1, 0, &GcnWeights::zeros(&[3, 4, 2])).unwrap();
        broker.serve(0, 1, 1, &[2]).unwrap();
        assert!(!broker.audit().is_clean());
    }
}
