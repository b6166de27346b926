#include "haid/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace haid {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
          c == '_')) {
      return false;
    }
  }
  return true;
}

}  // namespace

ConfigException::ConfigException(ConfigError err) : err_(std::move(err)) {
  std::ostringstream os;
  os << "config error";
  if (err_.line > 0) os << " at line " << err_.line;
  if (!err_.key.empty()) os << " (key '" << err_.key << "')";
  os << ": " << err_.message;
  text_ = os.str();
}

ConfigMap ConfigMap::parse_text(const std::string& text,
                                const std::string& origin) {
  ConfigMap cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigException(
          {lineno, "", "expected key=value in " + origin});
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (!valid_key(key)) {
      throw ConfigException({lineno, key, "malformed key"});
    }
    cfg.values_[key] = value;
    cfg.lines_[key] = lineno;
  }
  return cfg;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw ConfigException({0, "", "cannot open config file " + path});
  }
  std::ostringstream os;
  os << f.rdbuf();
  return parse_text(os.str(), path);
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) {
    throw ConfigException({0, key, "malformed key"});
  }
  values_[key] = trim(value);
  lines_[key] = 0;
}

bool ConfigMap::has(const std::string& key) const {
  return values_.count(key) > 0;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    throw ConfigException(
        {lines_.count(key) ? lines_.at(key) : 0, key,
         "expected a number, got '" + it->second + "'"});
  }
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  try {
    std::size_t pos = 0;
    const long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing text");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigException(
        {lines_.count(key) ? lines_.at(key) : 0, key,
         "expected an integer, got '" + it->second + "'"});
  }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigException({lines_.count(key) ? lines_.at(key) : 0, key,
                         "expected a boolean, got '" + it->second + "'"});
}

std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  return it->second;
}

std::vector<double> ConfigMap::get_double_array(
    const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  std::string v = trim(it->second);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ConfigException({lines_.count(key) ? lines_.at(key) : 0, key,
                           "expected [a,b,...], got '" + it->second + "'"});
  }
  v = v.substr(1, v.size() - 2);
  std::vector<double> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    const std::string cell = trim(item);
    if (cell.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(cell, &pos));
      if (pos != cell.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ConfigException({lines_.count(key) ? lines_.at(key) : 0, key,
                             "bad array element '" + cell + "'"});
    }
  }
  return out;
}

std::vector<std::string> ConfigMap::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    (void)value;
    if (!read_.count(key)) out.push_back(key);
  }
  return out;
}

std::string ConfigMap::canonical() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) {
    os << key << '=' << value << '\n';
  }
  return os.str();
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace haid
