// SPDX-License-Identifier: Apache-2.0

use acw_secprops::{expand_template, parse_property, AssetManifest, Expr, PropertyAst, Radix};
use proptest::prelude::*;

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}(\\.[A-Za-z][A-Za-z0-9_]{0,6}){0,2}(\\[0x[0-9a-f]{1,4}\\])?"
        .prop_filter("keywords", |s| s != "when" && s != "unless")
}

fn atom() -> impl Strategy<Value = Expr> {
    prop_oneof![
        name().prop_map(Expr::Signal),
        "[A-Za-z_][A-Za-z0-9_/]{0,8}".prop_map(Expr::Placeholder),
        any::<u32>().prop_map(|v| Expr::dec(u64::from(v))),
        (1u8..=16).prop_flat_map(|w| (Just(w), 0u64..(1u64 << w))).prop_map(|(w, v)| Expr::bin(w, v)),
        (1u8..=16).prop_flat_map(|w| (Just(w), 0u64..(1u64 << w))).prop_map(|(w, v)| Expr::Lit {
            value: v,
            width: Some(w),
            radix: Radix::Dec
        }),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    atom().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::eq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::ne(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::and(a, b)),
        ]
    })
}

fn property() -> impl Strategy<Value = PropertyAst> {
    prop_oneof![
        (expr(), proptest::option::of(expr()), expr(), proptest::option::of(expr()))
            .prop_map(|(s, t, d, u)| { PropertyAst::Ift { source: s, tag_cond: t, dest: d, unless_cond: u } }),
        (expr(), proptest::option::of(expr())).prop_map(|(a, u)| PropertyAst::Trace { assertion: a, unless_cond: u }),
    ]
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(p in property()) {
        let text = p.to_string();
        prop_assert_eq!(parse_property(&text).unwrap(), p, "{}", text);
    }

    #[test]
    fn expansion_count_equals_environments(n in 0usize..40, holes in 1usize..4) {
        let names: Vec<String> = (0..holes).map(|i| format!("h{i}")).collect();
        let mut text = format!("`{}` =/=> `{}`", names[0], names[names.len() - 1]);
        if holes == 3 {
            text.push_str(&format!(" unless (`{}` != 0)", names[1]));
        }
        let t = parse_property(&text).unwrap();
        let envs: Vec<_> = (0..n)
            .map(|k| names.iter().map(|h| (h.clone(), Expr::signal(format!("s{k}.{h}")))).collect())
            .collect();
        let out = expand_template("t", &t, &AssetManifest::new(envs)).unwrap();
        prop_assert_eq!(out.properties.len(), n);
        for p in &out.properties {
            prop_assert!(p.ast.placeholders().is_empty());
            prop_assert_eq!(parse_property(&p.ast.to_string()).unwrap(), p.ast.clone());
        }
    }
}
