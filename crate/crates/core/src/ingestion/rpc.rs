//! JSON-RPC 2.0 data source for archive nodes.
//!
//! Maps the [`DataSource`](super::DataSource) surface onto the de-facto node
//! API: `eth_getBlockByNumber` (+ batched `eth_getTransactionReceipt` for gas
//! used and status), `eth_getLogs`, `eth_getCode`, and `debug_traceTransaction`
//! (struct logs for opcode traces, the call tracer for internal transfers).
//!
//! Transport failures are retried up to the configured count with a short
//! linear backoff; protocol-level errors (a JSON-RPC `error` object) are
//! permanent. Receipts unavoidably collapse assertion failures and
//! out-of-gas into "reverted" — the opcode trace, which detectors actually
//! classify on, keeps the precise terminal.

use std::time::Duration;

use serde_json::{json, Value};

use super::{DataSource, RawLog};
use crate::chain_model::{
    Address, Block, ExecutionTrace, InternalTransfer, TraceTerminal, Transaction, TxHash, TxStatus,
};
use crate::{Error, Result};

/// Remote [`DataSource`] speaking JSON-RPC 2.0 over HTTP.
pub struct JsonRpcSource {
    url: String,
    client: reqwest::blocking::Client,
    batch_size: usize,
    retry_count: u32,
}

impl JsonRpcSource {
    /// Connect to `url`, batching up to `batch_size` calls per request and
    /// retrying transport failures `retry_count` times.
    pub fn new(url: &str, batch_size: usize, retry_count: u32) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch_size must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Source(format!("http client: {e}")))?;
        Ok(JsonRpcSource {
            url: url.to_string(),
            client,
            batch_size,
            retry_count,
        })
    }

    fn post(&self, body: &Value) -> Result<Value> {
        let mut last_failure = String::new();
        for attempt in 0..=self.retry_count {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 * attempt as u64));
            }
            let sent = self
                .client
                .post(&self.url)
                .json(body)
                .send()
                .and_then(|resp| resp.error_for_status())
                .and_then(|resp| resp.json::<Value>());
            match sent {
                Ok(value) => return Ok(value),
                Err(e) => last_failure = e.to_string(),
            }
        }
        Err(Error::Source(format!(
            "rpc request failed after {} attempts: {last_failure}",
            self.retry_count + 1
        )))
    }

    /// Single JSON-RPC call; unwraps the `result` member.
    fn call(&self, method: &str, params: Value) -> Result<Value> {
        let body = json!({"jsonrpc": "2.0", "id": 1, "method": method, "params": params});
        let reply = self.post(&body)?;
        extract_result(reply, method)
    }

    /// Batched calls, all with the same `method`; results in request order.
    fn call_batch(&self, method: &str, params_list: &[Value]) -> Result<Vec<Value>> {
        let mut results = Vec::with_capacity(params_list.len());
        for chunk in params_list.chunks(self.batch_size) {
            let body: Vec<Value> = chunk
                .iter()
                .enumerate()
                .map(|(i, params)| {
                    json!({"jsonrpc": "2.0", "id": i, "method": method, "params": params})
                })
                .collect();
            let reply = self.post(&Value::Array(body))?;
            let Value::Array(mut replies) = reply else {
                return Err(Error::Source(format!(
                    "{method}: batch reply is not an array"
                )));
            };
            // Servers may reorder batch replies; restore request order by id.
            replies.sort_by_key(|r| r.get("id").and_then(Value::as_u64).unwrap_or(u64::MAX));
            if replies.len() != chunk.len() {
                return Err(Error::Source(format!(
                    "{method}: batch reply count {} != request count {}",
                    replies.len(),
                    chunk.len()
                )));
            }
            for reply in replies {
                results.push(extract_result(reply, method)?);
            }
        }
        Ok(results)
    }
}

fn extract_result(reply: Value, method: &str) -> Result<Value> {
    if let Some(err) = reply.get("error") {
        return Err(Error::Source(format!("{method} failed: {err}")));
    }
    reply
        .get("result")
        .cloned()
        .ok_or_else(|| Error::Source(format!("{method}: reply has no result")))
}

// --- field extraction helpers -----------------------------------------------

fn field<'v>(value: &'v Value, name: &str, ctx: &str) -> Result<&'v Value> {
    value
        .get(name)
        .ok_or_else(|| Error::Source(format!("{ctx}: missing field {name:?}")))
}

fn str_field<'v>(value: &'v Value, name: &str, ctx: &str) -> Result<&'v str> {
    field(value, name, ctx)?
        .as_str()
        .ok_or_else(|| Error::Source(format!("{ctx}: field {name:?} is not a string")))
}

fn hex_u64_field(value: &Value, name: &str, ctx: &str) -> Result<u64> {
    let s = str_field(value, name, ctx)?;
    parse_hex_u64(s).map_err(|e| Error::Source(format!("{ctx}: {name}: {e}")))
}

fn hex_u128_field(value: &Value, name: &str, ctx: &str) -> Result<u128> {
    let s = str_field(value, name, ctx)?;
    let body = s
        .strip_prefix("0x")
        .ok_or_else(|| Error::Source(format!("{ctx}: {name}: expected 0x hex, got {s:?}")))?;
    u128::from_str_radix(body, 16)
        .map_err(|e| Error::Source(format!("{ctx}: {name}: bad hex {s:?}: {e}")))
}

fn parse_hex_u64(s: &str) -> std::result::Result<u64, String> {
    let body = s
        .strip_prefix("0x")
        .ok_or_else(|| format!("expected 0x hex, got {s:?}"))?;
    u64::from_str_radix(body, 16).map_err(|e| format!("bad hex {s:?}: {e}"))
}

fn address_field(value: &Value, name: &str, ctx: &str) -> Result<Address> {
    str_field(value, name, ctx)?
        .parse()
        .map_err(|e| Error::Source(format!("{ctx}: {name}: {e}")))
}

fn hash_field(value: &Value, name: &str, ctx: &str) -> Result<TxHash> {
    str_field(value, name, ctx)?
        .parse()
        .map_err(|e| Error::Source(format!("{ctx}: {name}: {e}")))
}

fn bytes_field(value: &Value, name: &str, ctx: &str) -> Result<Vec<u8>> {
    let s = str_field(value, name, ctx)?;
    let body = s
        .strip_prefix("0x")
        .ok_or_else(|| Error::Source(format!("{ctx}: {name}: expected 0x hex, got {s:?}")))?;
    hex::decode(body).map_err(|e| Error::Source(format!("{ctx}: {name}: bad hex: {e}")))
}

impl DataSource for JsonRpcSource {
    fn block(&self, number: u64) -> Result<Option<Block>> {
        let ctx = format!("eth_getBlockByNumber({number})");
        let raw = self.call(
            "eth_getBlockByNumber",
            json!([format!("0x{number:x}"), true]),
        )?;
        if raw.is_null() {
            return Ok(None);
        }

        let raw_txs = field(&raw, "transactions", &ctx)?
            .as_array()
            .cloned()
            .unwrap_or_default();

        // One receipt per transaction fills in gas_used and status.
        let receipt_params: Vec<Value> = raw_txs
            .iter()
            .map(|tx| Ok(json!([str_field(tx, "hash", &ctx)?])))
            .collect::<Result<_>>()?;
        let receipts = self.call_batch("eth_getTransactionReceipt", &receipt_params)?;

        let mut transactions = Vec::with_capacity(raw_txs.len());
        for (raw_tx, receipt) in raw_txs.iter().zip(&receipts) {
            let receiver = match field(raw_tx, "to", &ctx)? {
                Value::Null => None,
                v => Some(
                    v.as_str()
                        .ok_or_else(|| Error::Source(format!("{ctx}: to is not a string")))?
                        .parse()
                        .map_err(|e| Error::Source(format!("{ctx}: to: {e}")))?,
                ),
            };
            if receipt.is_null() {
                return Err(Error::Source(format!("{ctx}: missing receipt for a tx")));
            }
            let status = match str_field(receipt, "status", &ctx)? {
                "0x1" => TxStatus::Success,
                // Receipts cannot distinguish assert/out-of-gas from revert;
                // the opcode trace carries the precise terminal.
                "0x0" => TxStatus::Reverted,
                other => {
                    return Err(Error::Source(format!(
                        "{ctx}: unknown receipt status {other:?}"
                    )))
                }
            };
            transactions.push(Transaction {
                hash: hash_field(raw_tx, "hash", &ctx)?,
                block_number: number,
                tx_index: hex_u64_field(raw_tx, "transactionIndex", &ctx)? as u32,
                sender: address_field(raw_tx, "from", &ctx)?,
                receiver,
                value: hex_u128_field(raw_tx, "value", &ctx)?,
                gas_limit: hex_u64_field(raw_tx, "gas", &ctx)?,
                gas_used: hex_u64_field(receipt, "gasUsed", &ctx)?,
                gas_price: hex_u128_field(raw_tx, "gasPrice", &ctx)?,
                input: bytes_field(raw_tx, "input", &ctx)?,
                status,
            });
        }

        Ok(Some(Block {
            number,
            timestamp: hex_u64_field(&raw, "timestamp", &ctx)?,
            miner: address_field(&raw, "miner", &ctx)?,
            gas_limit: hex_u64_field(&raw, "gasLimit", &ctx)?,
            gas_used: hex_u64_field(&raw, "gasUsed", &ctx)?,
            transactions,
        }))
    }

    fn logs(&self, from: u64, to: u64) -> Result<Vec<RawLog>> {
        let ctx = "eth_getLogs";
        let raw = self.call(
            "eth_getLogs",
            json!([{"fromBlock": format!("0x{from:x}"), "toBlock": format!("0x{to:x}")}]),
        )?;
        let entries = raw
            .as_array()
            .ok_or_else(|| Error::Source(format!("{ctx}: result is not an array")))?;
        let mut logs = Vec::with_capacity(entries.len());
        for entry in entries {
            let topics_raw = field(entry, "topics", ctx)?
                .as_array()
                .ok_or_else(|| Error::Source(format!("{ctx}: topics is not an array")))?;
            let mut topics = Vec::with_capacity(topics_raw.len());
            for t in topics_raw {
                let s = t
                    .as_str()
                    .ok_or_else(|| Error::Source(format!("{ctx}: topic is not a string")))?;
                let body = s
                    .strip_prefix("0x")
                    .ok_or_else(|| Error::Source(format!("{ctx}: topic missing 0x")))?;
                let mut word = [0u8; 32];
                hex::decode_to_slice(body, &mut word)
                    .map_err(|e| Error::Source(format!("{ctx}: bad topic {s:?}: {e}")))?;
                topics.push(word);
            }
            logs.push(RawLog {
                tx_hash: hash_field(entry, "transactionHash", ctx)?,
                block_number: hex_u64_field(entry, "blockNumber", ctx)?,
                log_index: hex_u64_field(entry, "logIndex", ctx)? as u32,
                address: address_field(entry, "address", ctx)?,
                topics,
                data: bytes_field(entry, "data", ctx)?,
            });
        }
        Ok(logs)
    }

    fn code(&self, address: &Address) -> Result<Option<Vec<u8>>> {
        let raw = self.call("eth_getCode", json!([address.to_string(), "latest"]))?;
        let s = raw
            .as_str()
            .ok_or_else(|| Error::Source("eth_getCode: result is not a string".into()))?;
        let body = s
            .strip_prefix("0x")
            .ok_or_else(|| Error::Source("eth_getCode: result missing 0x".into()))?;
        if body.is_empty() {
            return Ok(None);
        }
        let bytes =
            hex::decode(body).map_err(|e| Error::Source(format!("eth_getCode: bad hex: {e}")))?;
        Ok(Some(bytes))
    }

    fn trace(&self, tx: &TxHash) -> Result<Option<ExecutionTrace>> {
        let ctx = "debug_traceTransaction";
        let raw = self.call("debug_traceTransaction", json!([tx.to_string(), {}]))?;
        if raw.is_null() {
            return Ok(None);
        }
        let failed = field(&raw, "failed", ctx)?.as_bool().unwrap_or(false);
        let struct_logs = field(&raw, "structLogs", ctx)?
            .as_array()
            .ok_or_else(|| Error::Source(format!("{ctx}: structLogs is not an array")))?;
        let mut opcodes = Vec::with_capacity(struct_logs.len());
        let mut last_error = String::new();
        for entry in struct_logs {
            opcodes.push(str_field(entry, "op", ctx)?.to_string());
            if let Some(err) = entry.get("error").and_then(Value::as_str) {
                last_error = err.to_ascii_lowercase();
            }
        }
        let terminal = if !failed {
            TraceTerminal::Normal
        } else if last_error.contains("out of gas") {
            TraceTerminal::OutOfGas
        } else if last_error.contains("invalid")
            || opcodes.last().map(String::as_str) == Some("INVALID")
        {
            TraceTerminal::Assert
        } else {
            TraceTerminal::Revert
        };
        Ok(Some(ExecutionTrace {
            tx_hash: *tx,
            opcodes,
            terminal,
        }))
    }

    fn internal_transfers(&self, tx: &TxHash) -> Result<Vec<InternalTransfer>> {
        let ctx = "debug_traceTransaction(callTracer)";
        let raw = self.call(
            "debug_traceTransaction",
            json!([tx.to_string(), {"tracer": "callTracer"}]),
        )?;
        if raw.is_null() {
            return Ok(Vec::new());
        }
        let mut transfers = Vec::new();
        // The root frame is the transaction itself; only sub-calls are
        // internal transfers.
        if let Some(calls) = raw.get("calls").and_then(Value::as_array) {
            for call in calls {
                collect_call_transfers(call, tx, ctx, &mut transfers)?;
            }
        }
        Ok(transfers)
    }
}

fn collect_call_transfers(
    frame: &Value,
    parent: &TxHash,
    ctx: &str,
    out: &mut Vec<InternalTransfer>,
) -> Result<()> {
    let value = match frame.get("value") {
        Some(v) => {
            let s = v
                .as_str()
                .ok_or_else(|| Error::Source(format!("{ctx}: value is not a string")))?;
            let body = s
                .strip_prefix("0x")
                .ok_or_else(|| Error::Source(format!("{ctx}: value missing 0x")))?;
            u128::from_str_radix(body, 16)
                .map_err(|e| Error::Source(format!("{ctx}: bad value {s:?}: {e}")))?
        }
        None => 0,
    };
    let call_type = frame.get("type").and_then(Value::as_str).unwrap_or("CALL");
    if value > 0 && call_type != "DELEGATECALL" && call_type != "STATICCALL" {
        out.push(InternalTransfer {
            parent_tx: *parent,
            from: address_field(frame, "from", ctx)?,
            to: address_field(frame, "to", ctx)?,
            value,
        });
    }
    if let Some(calls) = frame.get("calls").and_then(Value::as_array) {
        for call in calls {
            collect_call_transfers(call, parent, ctx, out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Minimal canned-response JSON-RPC server for exercising the client.
    fn serve(replies: Vec<ServerAction>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for action in replies {
                let (mut stream, _) = listener.accept().unwrap();
                match action {
                    ServerAction::Drop => continue, // close without responding
                    ServerAction::Reply(f) => {
                        let body = read_http_body(&mut stream);
                        let request: Value = serde_json::from_str(&body).unwrap();
                        let reply = f(&request).to_string();
                        let response = format!(
                            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                            reply.len(),
                            reply
                        );
                        stream.write_all(response.as_bytes()).unwrap();
                    }
                }
            }
        });
        format!("http://{addr}")
    }

    enum ServerAction {
        Drop,
        Reply(Box<dyn Fn(&Value) -> Value + Send>),
    }

    fn reply(f: impl Fn(&Value) -> Value + Send + 'static) -> ServerAction {
        ServerAction::Reply(Box::new(f))
    }

    fn read_http_body(stream: &mut std::net::TcpStream) -> String {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 1024];
        loop {
            let n = stream.read(&mut chunk).unwrap();
            buf.extend_from_slice(&chunk[..n]);
            if let Some(pos) = find_header_end(&buf) {
                let headers = String::from_utf8_lossy(&buf[..pos]).to_ascii_lowercase();
                let content_length: usize = headers
                    .lines()
                    .find_map(|l| l.strip_prefix("content-length:"))
                    .map(|v| v.trim().parse().unwrap())
                    .unwrap_or(0);
                while buf.len() < pos + 4 + content_length {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                }
                return String::from_utf8_lossy(&buf[pos + 4..pos + 4 + content_length]).into();
            }
        }
    }

    fn find_header_end(buf: &[u8]) -> Option<usize> {
        buf.windows(4).position(|w| w == b"\r\n\r\n")
    }

    #[test]
    fn fetches_code_and_maps_empty_to_none() {
        let url = serve(vec![
            reply(|_| json!({"jsonrpc": "2.0", "id": 1, "result": "0x6080"})),
            reply(|_| json!({"jsonrpc": "2.0", "id": 1, "result": "0x"})),
        ]);
        let source = JsonRpcSource::new(&url, 10, 0).unwrap();
        let a = Address([0x11; 20]);
        assert_eq!(source.code(&a).unwrap(), Some(vec![0x60, 0x80]));
        assert_eq!(source.code(&a).unwrap(), None);
    }

    #[test]
    fn retries_after_a_dropped_connection() {
        let url = serve(vec![
            ServerAction::Drop,
            reply(|_| json!({"jsonrpc": "2.0", "id": 1, "result": "0xfe"})),
        ]);
        let source = JsonRpcSource::new(&url, 10, 2).unwrap();
        assert_eq!(source.code(&Address([1; 20])).unwrap(), Some(vec![0xfe]));
    }

    #[test]
    fn gives_up_after_retry_budget() {
        let url = serve(vec![ServerAction::Drop, ServerAction::Drop]);
        let source = JsonRpcSource::new(&url, 10, 1).unwrap();
        let err = source.code(&Address([1; 20])).unwrap_err();
        assert!(err.to_string().contains("after 2 attempts"), "{err}");
    }

    #[test]
    fn rpc_error_objects_are_permanent_failures() {
        let url = serve(vec![reply(
            |_| json!({"jsonrpc": "2.0", "id": 1, "error": {"code": -32000, "message": "pruned"}}),
        )]);
        let source = JsonRpcSource::new(&url, 10, 3).unwrap();
        let err = source.code(&Address([1; 20])).unwrap_err();
        assert!(err.to_string().contains("pruned"), "{err}");
    }

    #[test]
    fn block_fetch_joins_receipts_and_maps_statuses() {
        let tx_hash = format!("0x{}", hex::encode([0xab_u8; 32]));
        let th = tx_hash.clone();
        let url = serve(vec![
            reply(move |req| {
                assert_eq!(req["method"], "eth_getBlockByNumber");
                assert_eq!(req["params"][0], "0x10");
                json!({"jsonrpc": "2.0", "id": 1, "result": {
                    "number": "0x10",
                    "timestamp": "0x5f5e1000",
                    "miner": format!("0x{}", hex::encode([0xee_u8; 20])),
                    "gasLimit": "0x989680",
                    "gasUsed": "0x5208",
                    "transactions": [{
                        "hash": th,
                        "transactionIndex": "0x0",
                        "from": format!("0x{}", hex::encode([0x01_u8; 20])),
                        "to": null,
                        "value": "0x0",
                        "gas": "0x7530",
                        "gasPrice": "0x3b9aca00",
                        "input": "0xdeadbeef"
                    }]
                }})
            }),
            reply(|req| {
                // Batched receipt lookup arrives as a JSON array.
                let reqs = req.as_array().expect("batch request");
                assert_eq!(reqs.len(), 1);
                assert_eq!(reqs[0]["method"], "eth_getTransactionReceipt");
                json!([{"jsonrpc": "2.0", "id": 0, "result": {
                    "status": "0x0",
                    "gasUsed": "0x5208"
                }}])
            }),
        ]);
        let source = JsonRpcSource::new(&url, 10, 0).unwrap();
        let block = source.block(0x10).unwrap().unwrap();
        assert_eq!(block.number, 0x10);
        assert_eq!(block.transactions.len(), 1);
        let tx = &block.transactions[0];
        assert_eq!(tx.hash, TxHash([0xab; 32]));
        assert_eq!(tx.receiver, None);
        assert_eq!(tx.gas_used, 21_000);
        assert_eq!(tx.status, TxStatus::Reverted);
        assert_eq!(tx.input, vec![0xde, 0xad, 0xbe, 0xef]);
    }

    #[test]
    fn trace_maps_struct_logs_and_terminals() {
        let url = serve(vec![reply(|req| {
            assert_eq!(req["method"], "debug_traceTransaction");
            json!({"jsonrpc": "2.0", "id": 1, "result": {
                "failed": true,
                "structLogs": [
                    {"op": "PUSH1"},
                    {"op": "SLOAD", "error": "out of gas"}
                ]
            }})
        })]);
        let source = JsonRpcSource::new(&url, 10, 0).unwrap();
        let trace = source.trace(&TxHash([1; 32])).unwrap().unwrap();
        assert_eq!(trace.opcodes, vec!["PUSH1", "SLOAD"]);
        assert_eq!(trace.terminal, TraceTerminal::OutOfGas);
    }

    #[test]
    fn internal_transfers_walk_the_call_tree() {
        let url = serve(vec![reply(|req| {
            assert_eq!(req["params"][1]["tracer"], "callTracer");
            json!({"jsonrpc": "2.0", "id": 1, "result": {
                "type": "CALL",
                "from": format!("0x{}", hex::encode([0x01_u8; 20])),
                "to": format!("0x{}", hex::encode([0x02_u8; 20])),
                "value": "0xde0b6b3a7640000",
                "calls": [
                    {
                        "type": "CALL",
                        "from": format!("0x{}", hex::encode([0x02_u8; 20])),
                        "to": format!("0x{}", hex::encode([0x03_u8; 20])),
                        "value": "0x5",
                        "calls": [{
                            "type": "STATICCALL",
                            "from": format!("0x{}", hex::encode([0x03_u8; 20])),
                            "to": format!("0x{}", hex::encode([0x04_u8; 20])),
                            "value": "0x1"
                        }]
                    },
                    {
                        "type": "CALL",
                        "from": format!("0x{}", hex::encode([0x02_u8; 20])),
                        "to": format!("0x{}", hex::encode([0x05_u8; 20])),
                        "value": "0x0"
                    }
                ]
            }})
        })]);
        let source = JsonRpcSource::new(&url, 10, 0).unwrap();
        let transfers = source.internal_transfers(&TxHash([7; 32])).unwrap();
        // Only the value-bearing sub-call counts: not the root (that is the
        // tx-level transfer), not static calls, not zero-value calls.
        assert_eq!(transfers.len(), 1);
        assert_eq!(transfers[0].from, Address([0x02; 20]));
        assert_eq!(transfers[0].to, Address([0x03; 20]));
        assert_eq!(transfers[0].value, 5);
    }
}
