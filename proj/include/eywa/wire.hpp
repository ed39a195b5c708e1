#pragma once

// JSON contract of the remote invocation protocol:
//   POST /v1/invoke   {"backend_id","task_type","payload","config"}
//                  -> {"status","output","usage":{"input_tokens","output_tokens"},"error"}
//   GET  /v1/describe -> [BackendDescriptor...]
// Decoders throw eywa::Error("bad_request") on shape violations.

#include <nlohmann/json.hpp>

#include "eywa/backend.hpp"

namespace eywa::wire {

nlohmann::json encode(const InvocationRequest& request);
InvocationRequest decode_request(const nlohmann::json& body);

nlohmann::json encode(const InvocationResult& result);
InvocationResult decode_result(const nlohmann::json& body);

nlohmann::json encode(const BackendDescriptor& descriptor);
BackendDescriptor decode_descriptor(const nlohmann::json& body);

nlohmann::json encode(const Series& series);
Series decode_series(const nlohmann::json& body);
nlohmann::json encode(const Table& table);
Table decode_table(const nlohmann::json& body);

}  // namespace eywa::wire
