document.getElementById('more').addEventListener('click', function () {
  var p = document.createElement('p');
  p.textContent = 'Second comment';
  document.getElementById('feed').appendChild(p);
});
