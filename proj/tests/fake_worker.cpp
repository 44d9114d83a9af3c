// Copyright 2026 The TSNAS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scripted worker for protocol tests. Usage: fake_worker <mode> [arg]
//
//   echo [score]     answer every evaluate with `score` (default 0.5)
//   reverse <k>      buffer k requests, answer them in reverse order
//   mismatch         answer with the wrong id
//   exit-after <n>   answer n requests, then exit
//   malformed        answer with a line that is not JSON
//   silent           read requests, never answer
//   error            answer with an error message
//   log <file>       like echo, appending every received line to <file>
//   noack            like echo, but answer freeze without an ack

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

void reply(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

json answer(const json& req, double score) {
  if (req.value("kind", "") == "freeze") return json{{"id", req["id"]}, {"ack", true}};
  return json{{"id", req["id"]}, {"score", score}};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  const std::string arg = argc > 2 ? argv[2] : "";
  std::ofstream log;
  if (mode == "log") log.open(arg, std::ios::app);

  std::vector<json> held;
  long answered = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (log.is_open()) log << line << "\n" << std::flush;
    const json req = json::parse(line, nullptr, false);
    if (req.is_discarded()) {
      reply(json{{"id", 0}, {"error", "unparseable request"}});
      continue;
    }
    if (mode == "echo" || mode == "log") {
      reply(answer(req, arg.empty() || mode == "log" ? 0.5 : std::stod(arg)));
    } else if (mode == "reverse") {
      held.push_back(req);
      if (held.size() == std::stoul(arg)) {
        for (auto it = held.rbegin(); it != held.rend(); ++it) reply(answer(*it, 0.25 + 0.01 * (*it)["id"].get<double>()));
        held.clear();
      }
    } else if (mode == "mismatch") {
      reply(json{{"id", req["id"].get<std::uint64_t>() + 1000}, {"score", 0.5}});
    } else if (mode == "exit-after") {
      if (answered >= std::stol(arg)) return 0;
      reply(answer(req, 0.5));
    } else if (mode == "malformed") {
      std::cout << "score=0.5\n" << std::flush;
    } else if (mode == "silent") {
      continue;
    } else if (mode == "error") {
      reply(json{{"id", req["id"]}, {"error", "out of memory"}});
    } else if (mode == "noack") {
      if (req.value("kind", "") == "freeze") reply(json{{"id", req["id"]}, {"ack", false}});
      else reply(answer(req, 0.5));
    } else {
      std::cerr << "unknown mode " << mode << "\n";
      return 2;
    }
    ++answered;
  }
  return 0;
}
