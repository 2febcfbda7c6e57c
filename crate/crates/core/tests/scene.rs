use sceneact_core::scene::*;
use sceneact_core::error::SceneError;

fn obj(shape: Shape, color: Color, pos: [f64; 3]) -> SceneObject {
    SceneObject { shape, size: Size::Small, material: Material::Rubber, color, pos }
}

#[test]
fn taxonomy_sizes() {
    assert_eq!(Shape::ALL.len(), 3);
    assert_eq!(Size::ALL.len(), 2);
    assert_eq!(Material::ALL.len(), 2);
    assert_eq!(Color::ALL.len(), 8);
    assert_eq!(ObjectAttrs::all().count(), 96);
}

#[test]
fn empty_scene_is_valid() {
    assert!(validate_scene(&Scene::empty()).is_valid());
}

#[test]
fn close_objects_violate_min_distance() {
    let s = Scene::new(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.0]), obj(Shape::Sphere, Color::Blue, [0.1, 0.0, 0.0])]);
    assert_eq!(validate_scene(&s).codes(), vec!["min-distance"]);
}

#[test]
fn eleven_objects_violate_capacity() {
    let objects = (0..11).map(|i| obj(Shape::Cube, Color::Red, [-2.5 + 0.5 * i as f64, 0.0, 0.0])).collect();
    assert!(validate_scene(&Scene::new(objects)).codes().contains(&"capacity"));
}

#[test]
fn floating_object_is_reported() {
    let s = Scene::new(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.7])]);
    assert_eq!(validate_scene(&s).codes(), vec!["floating"]);
}

#[test]
fn stacked_objects_are_valid() {
    let s = Scene::new(vec![obj(Shape::Cube, Color::Red, [1.0, 1.0, 0.0]), obj(Shape::Sphere, Color::Blue, [1.0, 1.0, 0.7])]);
    assert!(validate_scene(&s).is_valid());
}

#[test]
fn left_right_examples() {
    let s = Scene::from_unordered(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.0]), obj(Shape::Cube, Color::Red, [2.0, 0.0, 0.0])]);
    assert!(spatial_relation(&s, 0, 1, Relation::Left).unwrap());
    assert!(!spatial_relation(&s, 0, 1, Relation::Right).unwrap());
}

#[test]
fn on_example() {
    let s = Scene::from_unordered(vec![obj(Shape::Cube, Color::Red, [1.0, 1.0, 1.0]), obj(Shape::Cube, Color::Red, [1.0, 1.0, 0.0])]);
    assert!(spatial_relation(&s, 0, 1, Relation::On).unwrap());
    assert!(!spatial_relation(&s, 1, 0, Relation::On).unwrap());
}

#[test]
fn within_margin_is_neither_left_nor_right() {
    let s = Scene::from_unordered(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.0]), obj(Shape::Cube, Color::Red, [0.1, 0.0, 0.0])]);
    assert!(!spatial_relation(&s, 0, 1, Relation::Left).unwrap());
    assert!(!spatial_relation(&s, 0, 1, Relation::Right).unwrap());
}

#[test]
fn unknown_id_is_an_error() {
    let s = Scene::new(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.0])]);
    assert_eq!(spatial_relation(&s, 0, 3, Relation::Left), Err(SceneError::NoSuchObject(3)));
}

#[test]
fn equality_examples() {
    let a = Scene::from_unordered(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.0]), obj(Shape::Sphere, Color::Blue, [1.0, 0.0, 0.0])]);
    let permuted = Scene::from_unordered(vec![a.objects[1], a.objects[0]]);
    let mut recolored = a.clone();
    recolored.objects[0].color = Color::Cyan;
    assert!(scene_equal(&a, &a, 0.0));
    assert!(scene_equal(&a, &permuted, 0.0));
    assert!(!scene_equal(&a, &recolored, 0.0));
}

#[test]
fn equality_needs_a_bijection_not_just_coverage() {
    let a = Scene::from_unordered(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.0]), obj(Shape::Cube, Color::Red, [0.6, 0.0, 0.0])]);
    let b = Scene::from_unordered(vec![obj(Shape::Cube, Color::Red, [0.3, 0.0, 0.0]), obj(Shape::Cube, Color::Red, [2.0, 0.0, 0.0])]);
    assert!(!scene_equal(&a, &b, 0.4));
    assert!(scene_equal(&a, &Scene::from_unordered(vec![a.objects[1], a.objects[0]]), 0.0));
}

#[test]
fn json_layout_matches_documented_format() {
    let s = Scene::new(vec![obj(Shape::Cube, Color::Red, [0.0, 0.0, 0.0])]);
    assert_eq!(
        s.to_json(),
        r#"{"objects":[{"shape":"cube","size":"small","material":"rubber","color":"red","pos":[0.0,0.0,0.0]}]}"#
    );
}
