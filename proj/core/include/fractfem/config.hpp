// Plain-text run configuration: "[section]" headers with "key = value"
// entries, addressed as dotted keys ("quad.rho1"). Entries keep their file
// order so save/parse round-trips reproduce the same content, and every key
// must be consumed by the experiment that runs, so typos fail loudly.

#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace fractfem {

class Config {
 public:
  static Config parse(std::istream& in);
  static Config parseFile(const std::string& path);
  static Config parseString(const std::string& text);

  // Inserts or overwrites; an overwrite keeps the original position.
  void set(const std::string& dottedKey, const std::string& value);

  bool has(const std::string& dottedKey) const;

  // Getters mark the key as consumed and fall back when it is absent; a
  // present but malformed value throws.
  std::string getString(const std::string& key,
                        const std::string& fallback) const;
  double getDouble(const std::string& key, double fallback) const;
  int getInt(const std::string& key, int fallback) const;
  bool getBool(const std::string& key, bool fallback) const;

  void save(std::ostream& os) const;

  // Keys never touched by a getter, in file order.
  std::vector<std::string> unusedKeys() const;

  // Throws listing the unused keys, if any.
  void requireConsumed() const;

 private:
  struct Entry {
    std::string key;
    std::string value;
    mutable bool used = false;
  };

  const Entry* find(const std::string& key) const;

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace fractfem
