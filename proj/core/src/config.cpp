#include "fractfem/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fractfem {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config Config::parse(std::istream& in) {
  Config cfg;
  std::string line;
  std::string section;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw std::runtime_error("config line " + std::to_string(lineNo) +
                                 ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw std::runtime_error("config line " + std::to_string(lineNo) +
                                 ": empty section name");
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineNo) +
                               ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(lineNo) +
                               ": empty key");
    }
    cfg.set(section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

Config Config::parseFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse(in);
}

Config Config::parseString(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

void Config::set(const std::string& dottedKey, const std::string& value) {
  auto it = index_.find(dottedKey);
  if (it != index_.end()) {
    entries_[it->second].value = value;
    return;
  }
  index_.emplace(dottedKey, entries_.size());
  entries_.push_back(Entry{dottedKey, value, false});
}

bool Config::has(const std::string& dottedKey) const {
  return index_.count(dottedKey) != 0;
}

const Config::Entry* Config::find(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return nullptr;
  const Entry* e = &entries_[it->second];
  e->used = true;
  return e;
}

std::string Config::getString(const std::string& key,
                              const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

double Config::getDouble(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  char* end = nullptr;
  const double v = std::strtod(e->value.c_str(), &end);
  if (end == e->value.c_str() || *end != '\0') {
    throw std::runtime_error("config key " + key + ": not a number: '" +
                             e->value + "'");
  }
  return v;
}

int Config::getInt(const std::string& key, int fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  char* end = nullptr;
  const long v = std::strtol(e->value.c_str(), &end, 10);
  if (end == e->value.c_str() || *end != '\0') {
    throw std::runtime_error("config key " + key + ": not an integer: '" +
                             e->value + "'");
  }
  return static_cast<int>(v);
}

bool Config::getBool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config key " + key + ": not a boolean: '" +
                           e->value + "'");
}

void Config::save(std::ostream& os) const {
  // Sectionless keys first (a header cannot be closed again), then the rest
  // in insertion order with headers emitted on section changes.
  bool wroteAny = false;
  for (const Entry& e : entries_) {
    if (e.key.find('.') == std::string::npos) {
      os << e.key << " = " << e.value << "\n";
      wroteAny = true;
    }
  }
  std::string section;
  bool haveSection = false;
  for (const Entry& e : entries_) {
    const std::size_t dot = e.key.rfind('.');
    if (dot == std::string::npos) continue;
    const std::string sec = e.key.substr(0, dot);
    if (!haveSection || sec != section) {
      if (wroteAny) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
      haveSection = true;
      wroteAny = true;
    }
    os << e.key.substr(dot + 1) << " = " << e.value << "\n";
  }
}

std::vector<std::string> Config::unusedKeys() const {
  std::vector<std::string> out;
  for (const Entry& e : entries_) {
    if (!e.used) out.push_back(e.key);
  }
  return out;
}

void Config::requireConsumed() const {
  const auto bad = unusedKeys();
  if (bad.empty()) return;
  std::string msg = "config: unknown key(s):";
  for (const auto& k : bad) msg += " " + k;
  throw std::runtime_error(msg);
}

}  // namespace fractfem
