// SPDX-License-Identifier: Apache-2.0

//! Property files and template expansion.
//!
//! ```text
//! # comment
//! template <id>
//! <property text, possibly over several lines>
//! bind:
//! placeholder=signal, placeholder=signal
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{Expr, Kind, PropertyAst};
use crate::parse::{parse_atom, parse_property_at, ParseError};

/// One environment: a value for every placeholder of a template.
pub type Environment = BTreeMap<String, Expr>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssetManifest {
    pub environments: Vec<Environment>,
}

impl AssetManifest {
    pub fn new(environments: Vec<Environment>) -> Self {
        Self { environments }
    }

    /// Builds environments from `(placeholder, signal name)` pairs.
    pub fn from_pairs<'a>(envs: impl IntoIterator<Item = Vec<(&'a str, &'a str)>>) -> Self {
        let environments = envs
            .into_iter()
            .map(|env| {
                env.into_iter()
                    .map(|(k, v)| (k.to_string(), parse_atom(v).unwrap_or_else(|_| Expr::signal(v))))
                    .collect()
            })
            .collect();
        Self { environments }
    }

    /// One environment per line, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, SuiteError> {
        let mut environments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default();
            if !line.trim().is_empty() {
                environments.push(parse_env_line(line, i + 1)?);
            }
        }
        Ok(Self { environments })
    }

    pub fn len(&self) -> usize {
        self.environments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.environments.is_empty()
    }
}

fn parse_env_line(line: &str, ln: usize) -> Result<Environment, SuiteError> {
    let fmt_err = |col: usize, message: String| SuiteError::Format { line: ln, col, message };
    let mut env = Environment::new();
    let mut col = 1 + line.len() - line.trim_start().len();
    for part in line.trim().split(',') {
        let width = part.len() + 1;
        let Some((k, v)) = part.split_once('=') else {
            return Err(fmt_err(col, format!("expected `placeholder=value`, found `{}`", part.trim())));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(fmt_err(col, "empty placeholder or value".into()));
        }
        let val = parse_atom(v).map_err(|e| fmt_err(col, format!("bad value `{v}`: {}", e.kind)))?;
        if env.insert(k.to_string(), val).is_some() {
            return Err(fmt_err(col, format!("placeholder `{k}` bound twice")));
        }
        col += width;
    }
    Ok(env)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub ast: PropertyAst,
    pub manifest: AssetManifest,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Property {
    pub id: String,
    pub ast: PropertyAst,
}

impl Property {
    pub fn kind(&self) -> Kind {
        self.ast.kind()
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.ast)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SuiteError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{line}:{col}: {message}")]
    Format { line: usize, col: usize, message: String },
    #[error("template `{template}`, environment {env}: placeholder `{placeholder}` is unbound")]
    Unbound { template: String, env: usize, placeholder: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expansion {
    pub properties: Vec<Property>,
    pub warnings: Vec<String>,
}

/// One concrete property per environment, ids `{id}.{index}`.
pub fn expand_template(id: &str, tmpl: &PropertyAst, manifest: &AssetManifest) -> Result<Expansion, SuiteError> {
    let holes = tmpl.placeholders();
    let mut out = Expansion::default();
    let implicit = [Environment::new()];
    let envs: &[Environment] = if manifest.is_empty() && holes.is_empty() { &implicit } else { &manifest.environments };
    let width = envs.len().saturating_sub(1).to_string().len().max(3);
    for (k, env) in envs.iter().enumerate() {
        if let Some(p) = holes.iter().find(|p| !env.contains_key(*p)) {
            return Err(SuiteError::Unbound { template: id.into(), env: k, placeholder: p.clone() });
        }
        for extra in env.keys().filter(|p| !holes.contains(*p)) {
            out.warnings
                .push(format!("template `{id}`, environment {k}: `{extra}` is not a placeholder of the template"));
        }
        let ast = tmpl.substitute(&|p| env.get(p).cloned());
        out.properties.push(Property { id: format!("{id}.{k:0width$}"), ast });
    }
    Ok(out)
}

/// Parsed property file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Suite {
    pub templates: Vec<Template>,
}

impl Suite {
    pub fn parse(text: &str) -> Result<Self, SuiteError> {
        let mut templates = Vec::new();
        let mut cur: Option<(String, usize, String, usize, Option<AssetManifest>)> = None;
        let fmt_err = |line: usize, col: usize, message: String| SuiteError::Format { line, col, message };

        let finish = |cur: Option<(String, usize, String, usize, Option<AssetManifest>)>,
                      templates: &mut Vec<Template>|
         -> Result<(), SuiteError> {
            if let Some((id, line, body, body_line, manifest)) = cur {
                if body.trim().is_empty() {
                    return Err(fmt_err(line, 1, format!("template `{id}` has no property text")));
                }
                let ast = parse_property_at(&body, body_line, 1)?;
                templates.push(Template { id, ast, manifest: manifest.unwrap_or_default(), line });
            }
            Ok(())
        };

        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix("template") {
                if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                    finish(cur.take(), &mut templates)?;
                    let id = rest.trim();
                    if id.is_empty() || id.contains(char::is_whitespace) {
                        return Err(fmt_err(ln, 1, "expected `template <id>`".into()));
                    }
                    if templates.iter().any(|t| t.id == id) {
                        return Err(fmt_err(ln, 1, format!("duplicate template id `{id}`")));
                    }
                    cur = Some((id.to_string(), ln, String::new(), ln + 1, None));
                    continue;
                }
            }
            let Some((_, _, body, body_line, manifest)) = cur.as_mut() else {
                return Err(fmt_err(ln, 1, "text outside a template block".into()));
            };
            if t == "bind:" {
                if manifest.is_some() {
                    return Err(fmt_err(ln, 1, "second `bind:` section".into()));
                }
                *manifest = Some(AssetManifest::default());
                continue;
            }
            match manifest {
                None => {
                    if body.is_empty() {
                        *body_line = ln;
                    } else {
                        body.push('\n');
                    }
                    body.push_str(line.trim_end());
                }
                Some(m) => {
                    let env = parse_env_line(line, ln)?;
                    m.environments.push(env);
                }
            }
        }
        finish(cur, &mut templates)?;
        Ok(Self { templates })
    }

    pub fn expand(&self) -> Result<Expansion, SuiteError> {
        let mut out = Expansion::default();
        for t in &self.templates {
            let e = expand_template(&t.id, &t.ast, &t.manifest)?;
            out.properties.extend(e.properties);
            out.warnings.extend(e.warnings);
        }
        Ok(out)
    }

    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_property;

    #[test]
    fn two_placeholders_five_environments() {
        let t = parse_property("`a` =/=> `b`").unwrap();
        let m = AssetManifest::from_pairs((0..5).map(|_| vec![("a", "x.y"), ("b", "z")]));
        let e = expand_template("t", &t, &m).unwrap();
        assert_eq!(e.properties.len(), 5);
        assert!(e.properties.iter().all(|p| p.ast.placeholders().is_empty()));
        assert_eq!(e.properties[4].id, "t.004");
    }

    #[test]
    fn unbound_and_extra_bindings() {
        let t = parse_property("`a` =/=> `b`").unwrap();
        let m = AssetManifest::from_pairs([vec![("a", "x")]]);
        assert!(matches!(expand_template("t", &t, &m), Err(SuiteError::Unbound { .. })));
        let m = AssetManifest::from_pairs([vec![("a", "x"), ("b", "y"), ("c", "z")]]);
        let e = expand_template("t", &t, &m).unwrap();
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn literal_bindings() {
        let t = parse_property("`r` == `d` unless (`s` != 2'b00)").unwrap();
        let m = AssetManifest::from_pairs([vec![("r", "acw0.cfg.ctrl"), ("d", "0"), ("s", "acw0.r_state")]]);
        let p = &expand_template("t", &t, &m).unwrap().properties[0];
        assert_eq!(p.ast.to_string(), "acw0.cfg.ctrl == 0 unless (acw0.r_state != 2'b00)");
    }

    #[test]
    fn file_format() {
        let text = "\
# header
template a.one   # trailing comment
  `src` when (ARESETN == 0)
    =/=> `dst`
bind:
  src=c0.m.ARADDR, dst=acw0.s.ARADDR
  src=c0.m.ARLEN,  dst=acw0.s.ARLEN

template a.two
acw0.intr_r == 1 unless (acw0.r_state != 2'b10)
";
        let s = Suite::parse(text).unwrap();
        assert_eq!(s.templates.len(), 2);
        assert_eq!(s.templates[0].manifest.len(), 2);
        let e = s.expand().unwrap();
        assert_eq!(e.properties.len(), 3);
        assert_eq!(e.properties[1].ast.to_string(), "c0.m.ARLEN when (ARESETN == 0) =/=> acw0.s.ARLEN");
    }

    #[test]
    fn file_errors_have_positions() {
        let e = Suite::parse("template t\n  a ==\n").unwrap_err();
        assert!(matches!(e, SuiteError::Parse(ParseError { line: 2, col: 7, .. })));
        let e = Suite::parse("template t\n`a` =/=> b\nbind:\n  a=x, bogus\n").unwrap_err();
        assert_eq!(
            e,
            SuiteError::Format { line: 4, col: 7, message: "expected `placeholder=value`, found `bogus`".into() }
        );
        let e = Suite::parse("template t\n  x ||| y\n").unwrap_err();
        let SuiteError::Parse(p) = e else { panic!() };
        assert_eq!((p.line, p.col), (2, 5));
        assert!(Suite::parse("stray\n").is_err());
        assert!(Suite::parse("template t\nx\ntemplate t\ny\n").is_err());
    }
}
