/*
 * Copyright 2026 The Fedrash Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDRASH_STATUS_MACROS_H_
#define FEDRASH_STATUS_MACROS_H_

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define FEDRASH_STATUS_CONCAT_INNER_(x, y) x##y
#define FEDRASH_STATUS_CONCAT_(x, y) FEDRASH_STATUS_CONCAT_INNER_(x, y)

// Evaluates `expr` (an absl::Status) and returns it from the enclosing
// function if it is not OK.
#define FEDRASH_RETURN_IF_ERROR(expr)       \
  do {                                      \
    const ::absl::Status _status = (expr);  \
    if (!_status.ok()) return _status;      \
  } while (0)

// Evaluates `rexpr` (an absl::StatusOr<T>), returning the error status from
// the enclosing function on failure and otherwise moving the value into `lhs`.
#define FEDRASH_ASSIGN_OR_RETURN(lhs, rexpr)                                 \
  FEDRASH_ASSIGN_OR_RETURN_IMPL_(                                            \
      FEDRASH_STATUS_CONCAT_(_statusor_, __LINE__), lhs, rexpr)

#define FEDRASH_ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                                   \
  if (!statusor.ok()) return statusor.status();              \
  lhs = std::move(statusor).value()

#endif  // FEDRASH_STATUS_MACROS_H_
