//! The on-disk dataset bundle: `users.jsonl`, `posts.jsonl`, `interactions.csv`.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    check_concepts, validate_user_fields, Interaction, InteractionDataset, PostRecord, UserRecord,
    MIN_USER_INTERACTIONS,
};
use crate::error::{Error, Result};

pub const USERS_FILE: &str = "users.jsonl";
pub const POSTS_FILE: &str = "posts.jsonl";
pub const INTERACTIONS_FILE: &str = "interactions.csv";
/// Optional list of concept names, one JSON array of strings.
pub const CONCEPTS_FILE: &str = "concepts.json";

/// What happened while loading a bundle.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped_users: usize,
    pub duplicate_interactions: usize,
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<InteractionDataset> {
    load_dataset_with_report(dir).map(|(ds, _)| ds)
}

/// Loads a bundle and drops users with fewer than two interactions.
pub fn load_dataset_with_report(dir: impl AsRef<Path>) -> Result<(InteractionDataset, LoadReport)> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let posts: Vec<PostRecord> = read_jsonl(&dir.join(POSTS_FILE))?;
    let users: Vec<UserRecord> = read_jsonl(&dir.join(USERS_FILE))?;
    check_records(&dir.join(USERS_FILE), &dir.join(POSTS_FILE), &users, &posts)?;

    let user_index: HashMap<&str, usize> = users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.user_id.as_str(), i))
        .collect();
    let post_index: HashMap<&str, usize> = posts
        .iter()
        .enumerate()
        .map(|(i, p)| (p.post_id.as_str(), i))
        .collect();
    let path = dir.join(INTERACTIONS_FILE);
    let pairs = read_interactions(&path, &user_index, &post_index)?;
    let raw = pairs.len();

    let ds = InteractionDataset::new(users, posts, pairs)?;
    let duplicate_interactions = raw - ds.interactions().len();
    if duplicate_interactions > 0 {
        log::warn!(
            "{}: merged {duplicate_interactions} duplicate interactions",
            path.display()
        );
    }
    let (ds, dropped_users) = ds.filter_min_interactions(MIN_USER_INTERACTIONS)?;
    if dropped_users > 0 {
        log::info!(
            "dropped {dropped_users} users with fewer than {MIN_USER_INTERACTIONS} interactions"
        );
    }
    Ok((
        ds,
        LoadReport {
            dropped_users,
            duplicate_interactions,
        },
    ))
}

/// Writes the bundle. Output is deterministic for a given dataset.
pub fn save_dataset(ds: &InteractionDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&dir.join(USERS_FILE), ds.users())?;
    write_jsonl(&dir.join(POSTS_FILE), ds.posts())?;

    let path = dir.join(INTERACTIONS_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::io(&path, std::io::Error::other(e));
    w.write_record(["user_id", "post_id"]).map_err(csv_err)?;
    for it in ds.interactions() {
        w.write_record([&ds.users()[it.user].user_id, &ds.posts()[it.post].post_id])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Reads `concepts.json` when the bundle ships one.
pub fn load_concept_names(dir: impl AsRef<Path>) -> Result<Option<Vec<String>>> {
    let path = dir.as_ref().join(CONCEPTS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-record checks that can name the offending line.
fn check_records(
    users_path: &Path,
    posts_path: &Path,
    users: &[UserRecord],
    posts: &[PostRecord],
) -> Result<()> {
    let malformed = |path: &Path, line: usize, message: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let dim = posts
        .first()
        .map(|p| p.concepts.len())
        .or_else(|| {
            users
                .iter()
                .flat_map(|u| u.timeline_concepts.iter().chain(&u.liked_concepts))
                .map(Vec::len)
                .next()
        })
        .unwrap_or(0);
    let mut seen = HashMap::new();
    for (i, p) in posts.iter().enumerate() {
        check_concepts(&p.concepts, dim, &format!("post `{}`", p.post_id))
            .map_err(|m| malformed(posts_path, i + 1, m))?;
        if seen.insert(p.post_id.as_str(), i).is_some() {
            return Err(malformed(
                posts_path,
                i + 1,
                format!("duplicate post id `{}`", p.post_id),
            ));
        }
    }
    let mut seen = HashMap::new();
    for (i, u) in users.iter().enumerate() {
        validate_user_fields(u, dim).map_err(|m| malformed(users_path, i + 1, m))?;
        if seen.insert(u.user_id.as_str(), i).is_some() {
            return Err(malformed(
                users_path,
                i + 1,
                format!("duplicate user id `{}`", u.user_id),
            ));
        }
    }
    Ok(())
}

fn read_interactions(
    path: &PathBuf,
    users: &HashMap<&str, usize>,
    posts: &HashMap<&str, usize>,
) -> Result<Vec<Interaction>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(|e| Error::Malformed {
        path: path.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "user_id" || &headers[1] != "post_id" {
        return Err(Error::Malformed {
            path: path.clone(),
            line: 1,
            message: format!(
                "expected header `user_id,post_id`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Malformed {
            path: path.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Malformed {
                path: path.clone(),
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let user = *users
            .get(&record[0])
            .ok_or_else(|| Error::DanglingReference {
                path: path.clone(),
                line,
                kind: "user_id",
                id: record[0].to_string(),
            })?;
        let post = *posts
            .get(&record[1])
            .ok_or_else(|| Error::DanglingReference {
                path: path.clone(),
                line,
                kind: "post_id",
                id: record[1].to_string(),
            })?;
        out.push(Interaction { user, post });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::small;

    #[test]
    fn round_trip_preserves_counts_and_contents() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        save_dataset(&ds, dir.path()).unwrap();
        let (loaded, report) = load_dataset_with_report(dir.path()).unwrap();
        assert_eq!(report, LoadReport::default());
        assert_eq!(
            (
                loaded.n_users(),
                loaded.n_posts(),
                loaded.interactions().len()
            ),
            (3, 5, 7)
        );
        assert!(loaded.same_contents(&ds));
    }

    #[test]
    fn single_interaction_user_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&small(), dir.path()).unwrap();
        let path = dir.path().join(INTERACTIONS_FILE);
        let text = fs::read_to_string(&path).unwrap();
        let kept: Vec<&str> = text.lines().filter(|l| *l != "u2,p4").collect();
        fs::write(&path, kept.join("\n")).unwrap();
        let (ds, report) = load_dataset_with_report(dir.path()).unwrap();
        assert_eq!(report.dropped_users, 1);
        assert!(ds.user_idx("u2").is_none());
        assert_eq!(ds.n_users(), 2);
    }

    #[test]
    fn dangling_post_reference_names_line() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&small(), dir.path()).unwrap();
        let path = dir.path().join(INTERACTIONS_FILE);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("u0,nope\n");
        fs::write(&path, text).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::DanglingReference { kind, id, line, .. }) => {
                assert_eq!(kind, "post_id");
                assert_eq!(id, "nope");
                assert_eq!(line, 9);
            }
            other => panic!("expected dangling reference, got {other:?}"),
        }
    }

    #[test]
    fn malformed_user_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&small(), dir.path()).unwrap();
        let path = dir.path().join(USERS_FILE);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{not json\n");
        fs::write(&path, text).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let err = load_dataset("/definitely/not/here").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/definitely/not/here"));
    }
}
