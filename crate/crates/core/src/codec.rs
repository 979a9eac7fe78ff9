//! Percent-style escaping for list fields in tab-separated artifacts.

const ESCAPED: [(char, &str); 5] = [('%', "%25"), (',', "%2C"), ('=', "%3D"), ('\t', "%09"), ('\n', "%0A")];

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match ESCAPED.iter().find(|(e, _)| *e == c) {
            Some((_, code)) => out.push_str(code),
            None => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape(s: &str) -> String {
    if !s.contains('%') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('%') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match ESCAPED.iter().find(|(_, code)| tail.starts_with(code)) {
            Some((c, code)) => {
                out.push(*c);
                rest = &tail[code.len()..];
            }
            None => {
                out.push('%');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(s in ".*") {
            let e = escape(&s);
            prop_assert!(!e.contains(',') && !e.contains('\t') && !e.contains('='));
            prop_assert_eq!(unescape(&e), s);
        }
    }
}
