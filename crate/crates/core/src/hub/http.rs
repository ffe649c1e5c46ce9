//! JSON HTTP API and server-sent event stream over a [`Hub`].

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;

use super::{Hub, HubError, Subscription, SubscriptionError, MAX_HISTORY_LIMIT};
use crate::sim::SimControl;
use crate::wire::Command;

pub const KEEPALIVE_INTERVAL: Duration = Duration::from_secs(15);

/// Milliseconds on the hub's clock; every record's `received_at_ms` comes
/// from here.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

/// Milliseconds since the clock was created.
pub fn wall_clock() -> Clock {
    let start = Instant::now();
    Arc::new(move || start.elapsed().as_millis() as u64)
}

#[derive(Clone)]
struct AppState {
    hub: Hub,
    clock: Clock,
    keepalive: Duration,
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<HubError> for ApiError {
    fn from(e: HubError) -> Self {
        let status = match e {
            HubError::UnknownLot(_) => StatusCode::NOT_FOUND,
            HubError::InvalidArgument(_) | HubError::AlreadyRegistered(_) => {
                StatusCode::BAD_REQUEST
            }
            HubError::Persist(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn lot_id(raw: &str) -> Result<u8, ApiError> {
    raw.parse()
        .map_err(|_| ApiError(StatusCode::NOT_FOUND, format!("unknown lot {raw}")))
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

pub fn router(hub: Hub, clock: Clock) -> Router {
    router_with_keepalive(hub, clock, KEEPALIVE_INTERVAL)
}

pub fn router_with_keepalive(hub: Hub, clock: Clock, keepalive: Duration) -> Router {
    Router::new()
        .route("/api/lots", get(list_lots))
        .route("/api/lots/{id}", get(get_lot))
        .route("/api/lots/{id}/events", get(get_events))
        .route("/api/lots/{id}/commands", post(post_command))
        .route("/api/lots/{id}/stream", get(stream_lot))
        .route("/api/sim/vehicles", post(post_vehicle))
        .with_state(AppState {
            hub,
            clock,
            keepalive,
        })
}

/// Serves the API until the listener fails.
pub async fn serve(
    listener: tokio::net::TcpListener,
    hub: Hub,
    clock: Clock,
) -> std::io::Result<()> {
    axum::serve(listener, router(hub, clock)).await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}

/// Marks silent controllers offline once a second.
pub async fn liveness_loop(hub: Hub, clock: Clock) {
    let mut every = tokio::time::interval(Duration::from_secs(1));
    loop {
        every.tick().await;
        for r in hub.check_liveness(clock()) {
            log::info!("lot {} went offline", r.lot_id);
        }
    }
}

async fn list_lots(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.hub.lots())
}

async fn get_lot(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = s.hub.snapshot(lot_id(&id)?)?;
    Ok(Json(view).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    from_seq: Option<u64>,
    limit: Option<usize>,
}

async fn get_events(
    State(s): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<EventsQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let id = lot_id(&id)?;
    let Query(q) = query.map_err(|e| bad_request(e.body_text()))?;
    let from_seq = q.from_seq.unwrap_or(0);
    let records = s
        .hub
        .history(id, from_seq, q.limit.unwrap_or(MAX_HISTORY_LIMIT))?;
    let next_from_seq = records.last().map_or(from_seq, |r| r.record_seq);
    Ok(Json(json!({ "records": records, "next_from_seq": next_from_seq })).into_response())
}

async fn post_command(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let id = lot_id(&id)?;
    let command: Command =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("bad command: {e}")))?;
    let command_id = s.hub.issue_command(id, command, (s.clock)())?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "command_id": command_id })),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
enum VehicleAction {
    Arrive { stay_ms: u64 },
    Depart { slot: u8 },
}

async fn post_vehicle(State(s): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let Some(tx) = s.hub.sim_control() else {
        return Err(ApiError(
            StatusCode::NOT_FOUND,
            "hub is not running a simulation".into(),
        ));
    };
    let action: VehicleAction =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("bad action: {e}")))?;
    let control = match action {
        VehicleAction::Arrive { stay_ms: 0 } => return Err(bad_request("stay_ms must be > 0")),
        VehicleAction::Arrive { stay_ms } => SimControl::Arrive { stay_ms },
        VehicleAction::Depart { slot } => {
            let slots = s.hub.lots().first().map_or(0, |l| l.slot_count);
            if slot == 0 || slot as usize > slots {
                return Err(bad_request(format!("slot {slot} outside 1..={slots}")));
            }
            SimControl::Depart { slot }
        }
    };
    tx.send(control).map_err(|_| {
        ApiError(
            StatusCode::SERVICE_UNAVAILABLE,
            "simulation has ended".into(),
        )
    })?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true }))).into_response())
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    from_seq: Option<u64>,
}

fn record_event(r: &super::LotEventRecord) -> Event {
    Event::default()
        .id(r.record_seq.to_string())
        .data(r.to_json_line())
}

enum Feed {
    Live(Subscription),
    Done,
}

async fn stream_lot(
    State(s): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    query: Result<Query<StreamQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let id = lot_id(&id)?;
    let Query(q) = query.map_err(|e| bad_request(e.body_text()))?;
    // An explicit from_seq wins over a browser's automatic resume header.
    let resume = q.from_seq.or_else(|| {
        headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
    });
    let (backlog, sub) = match resume {
        Some(from) => s.hub.subscribe_from(id, from)?,
        None => (Vec::new(), s.hub.subscribe(id)?),
    };
    let backlog = stream::iter(backlog.into_iter().map(|r| Ok(record_event(&r))));
    let live = stream::unfold(Feed::Live(sub), move |feed| async move {
        let Feed::Live(mut sub) = feed else {
            return None;
        };
        match sub.recv().await {
            Ok(r) => Some((Ok(record_event(&r)), Feed::Live(sub))),
            Err(SubscriptionError::Overflow { missed }) => {
                let ev = Event::default()
                    .event("overflow")
                    .data(json!({ "error": "overflow", "missed": missed }).to_string());
                Some((Ok(ev), Feed::Done))
            }
            Err(SubscriptionError::Closed) => None,
        }
    });
    Ok(Sse::new(backlog.chain(live))
        .keep_alive(KeepAlive::new().interval(s.keepalive).text("keepalive")))
}
