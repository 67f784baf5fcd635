use trampsim::ingest::{parse_describegraph, to_describegraph, IngestError};
use trampsim::{ChannelId, Network, DEFAULT_AMOUNT};

const FIXTURE: &str = include_str!("fixtures/describegraph_small.json");

fn fixture() -> Network {
    parse_describegraph(FIXTURE.as_bytes()).expect("fixture parses")
}

fn channel_between(net: &Network, from: &str, to: &str) -> Option<ChannelId> {
    let (a, b) = (net.node_by_key(from)?, net.node_by_key(to)?);
    net.channels().iter().find(|c| c.src == a && c.dst == b).map(|c| c.id)
}

#[test]
fn hand_counted_nodes_and_channels() {
    let net = fixture();
    // five listed nodes plus one that only appears as an edge endpoint
    assert_eq!(net.node_count(), 6);
    // 2 + 1 + 0 + 2 + 1 + 1 enabled sides
    assert_eq!(net.channel_count(), 7);
    let keys: Vec<&str> = net.nodes().map(|v| net.key(v)).collect();
    assert_eq!(keys, ["02a1aa", "02b2bb", "03c3cc", "03d4dd", "02e5ee", "02f6ff"]);
}

#[test]
fn disabled_and_missing_sides_are_omitted() {
    let net = fixture();
    assert!(channel_between(&net, "02b2bb", "03c3cc").is_none());
    assert!(channel_between(&net, "03c3cc", "02b2bb").is_some());
    assert!(channel_between(&net, "03c3cc", "03d4dd").is_none());
    assert!(channel_between(&net, "03d4dd", "03c3cc").is_none());
    assert!(channel_between(&net, "02e5ee", "03d4dd").is_none());
    assert!(channel_between(&net, "02f6ff", "02b2bb").is_none());
}

#[test]
fn ids_follow_edge_ordinal_and_side() {
    let net = fixture();
    let ids: Vec<u64> = net.channels().iter().map(|c| c.id.0).collect();
    // the fully disabled third edge takes no ordinal
    assert_eq!(ids, [0, 1, 3, 4, 5, 6, 8]);
}

#[test]
fn weight_at_default_amount_is_base_plus_rate() {
    let net = fixture();
    let expected = [
        ("02a1aa", "02b2bb", 1001),
        ("02b2bb", "02a1aa", 100),
        ("03c3cc", "02b2bb", 2),
        ("02a1aa", "03c3cc", 2),
        ("03c3cc", "02a1aa", 8),
        ("03d4dd", "02e5ee", 2500),
        ("02b2bb", "02f6ff", 20),
    ];
    for (from, to, w) in expected {
        let id = channel_between(&net, from, to).unwrap();
        let c = net.channel(id).unwrap();
        assert_eq!(c.weight(DEFAULT_AMOUNT), w, "{from}->{to}");
        assert_eq!(c.weight(DEFAULT_AMOUNT), c.base_fee as u128 + c.proportional_rate as u128);
    }
}

#[test]
fn capacity_is_converted_to_msat() {
    let net = fixture();
    let cap = |from, to| net.channel(channel_between(&net, from, to).unwrap()).unwrap().capacity;
    assert_eq!(cap("02a1aa", "02b2bb"), 100_000_000);
    assert_eq!(cap("03c3cc", "02b2bb"), 250_000_000);
    assert_eq!(cap("02a1aa", "03c3cc"), 0);
    assert_eq!(cap("03d4dd", "02e5ee"), 1_000_000_000);
}

#[test]
fn serialize_then_reparse_is_identity() {
    let net = fixture();
    let once = to_describegraph(&net).unwrap();
    let again = parse_describegraph(once.as_bytes()).unwrap();
    assert_eq!(again, net);
    assert_eq!(to_describegraph(&again).unwrap(), once);
}

#[test]
fn fee_above_32_bits_is_rejected() {
    let doc = FIXTURE.replacen("\"fee_base_msat\": \"1000\"", "\"fee_base_msat\": \"4294967296\"", 1);
    assert!(matches!(parse_describegraph(doc.as_bytes()), Err(IngestError::Validation { field: "fee_base_msat", .. })));
}

#[test]
fn negative_rate_is_rejected() {
    let doc = FIXTURE.replacen("\"fee_rate_milli_msat\": \"100\"", "\"fee_rate_milli_msat\": \"-100\"", 1);
    let err = parse_describegraph(doc.as_bytes()).unwrap_err();
    assert!(matches!(err, IngestError::Validation { field: "fee_rate_milli_msat", reason: "negative", .. }), "{err}");
}

#[test]
fn truncated_document_reports_position() {
    let cut = &FIXTURE[..FIXTURE.len() / 2];
    match parse_describegraph(cut.as_bytes()) {
        Err(IngestError::Parse { line, .. }) => assert!(line > 1),
        other => panic!("expected a parse error, got {other:?}"),
    }
}
