//! Runs the emitted SQL in SQLite and compares with the in-memory engine.

use dissoc_core::db::{Database, Value};
use dissoc_core::engine::{eval_viewset, ScoredRelation};
use dissoc_core::optimize::shared_view_plan;
use dissoc_core::query::Catalog;
use dissoc_core::random::{random_database, random_query, rng, QueryShape};
use dissoc_core::sql::{emit_sql, emit_sql_reduced};
use rusqlite::functions::FunctionFlags;
use rusqlite::Connection;

fn connect(db: &Database, catalog: &Catalog) -> Connection {
    let conn = Connection::open_in_memory().unwrap();
    let flags = FunctionFlags::SQLITE_UTF8 | FunctionFlags::SQLITE_DETERMINISTIC;
    conn.create_scalar_function("EXP", 1, flags, |c| Ok(c.get::<f64>(0)?.exp()))
        .unwrap();
    conn.create_scalar_function("LN", 1, flags, |c| Ok(c.get::<f64>(0)?.ln()))
        .unwrap();
    conn.create_scalar_function("LEAST", 2, flags, |c| Ok(c.get::<f64>(0)?.min(c.get::<f64>(1)?)))
        .unwrap();
    for decl in catalog.relations() {
        let mut cols: Vec<String> = (1..=decl.arity).map(|i| format!("a{i} INTEGER")).collect();
        if decl.probabilistic {
            cols.push("p REAL".into());
        }
        conn.execute(&format!("CREATE TABLE {} ({})", decl.name, cols.join(", ")), [])
            .unwrap();
        for t in db.get(&decl.name).unwrap().tuples() {
            let mut vals: Vec<String> = t.values.iter().map(Value::to_string).collect();
            if decl.probabilistic {
                vals.push(format!("{:e}", t.p));
            }
            conn.execute(&format!("INSERT INTO {} VALUES ({})", decl.name, vals.join(", ")), [])
                .unwrap();
        }
    }
    conn
}

fn run(conn: &Connection, sql: &str, width: usize) -> Vec<(Vec<i64>, f64)> {
    let mut stmt = conn.prepare(sql).unwrap_or_else(|e| panic!("{e}\n{sql}"));
    let mut rows: Vec<(Vec<i64>, f64)> = stmt
        .query_map([], |r| {
            let key = (0..width).map(|i| r.get::<_, i64>(i)).collect::<Result<Vec<_>, _>>()?;
            Ok((key, r.get::<_, f64>(width)?))
        })
        .unwrap()
        .map(Result::unwrap)
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows
}

fn expected(rel: &ScoredRelation) -> Vec<(Vec<i64>, f64)> {
    rel.rows
        .iter()
        .map(|(k, &p)| {
            let key = k
                .iter()
                .map(|v| match v {
                    Value::Int(i) => *i,
                    Value::Text(_) => unreachable!("integer test data"),
                })
                .collect();
            (key, p)
        })
        .collect()
}

#[test]
fn emitted_sql_matches_engine() {
    let shape = QueryShape {
        max_atoms: 4,
        max_vars: 4,
        max_arity: 3,
        head_prob: 0.25,
        det_prob: 0.25,
    };
    let mut r = rng(17);
    for case in 0..60 {
        let (q, catalog) = random_query(&mut r, &shape);
        let db = random_database(&mut r, &catalog, 3, 8, 0.9);
        let schema = case % 2 == 0;
        let vs = shared_view_plan(&q, &catalog, schema);
        let want = expected(&eval_viewset(&vs, &db).unwrap());
        let conn = connect(&db, &catalog);
        for sql in [emit_sql(&vs, &catalog), emit_sql_reduced(&vs, &q, &catalog)] {
            let got = run(&conn, &sql, q.head().len());
            assert_eq!(got.len(), want.len(), "{q}\n{sql}");
            for ((gk, gp), (wk, wp)) in got.iter().zip(&want) {
                assert_eq!(gk, wk, "{q}");
                assert!((gp - wp).abs() < 1e-9, "{q}: {gp} vs {wp}\n{sql}");
            }
        }
    }
}
